#include "ada/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <png.h>

#include "ada/errors.hpp"
#include "ada/hash.hpp"
#include "ada/random.hpp"
#include "ada/serialize.hpp"

namespace ada {

namespace fs = std::filesystem;

std::string dataset_fingerprint(const ImageBatch& batch) {
  Sha256 h;
  h.update(batch.pixels);
  for (int label : batch.labels) h.update(std::to_string(label) + ",");
  return h.hex_digest();
}

std::string file_list_hash(std::span<const std::string> files) {
  Sha256 h;
  for (const auto& f : files) h.update(f + "\n");
  return h.hex_digest();
}

ImageBatch take(const ImageBatch& batch, int begin, int end) {
  ImageBatch out;
  out.pixels = slice_samples(batch.pixels, begin, end);
  out.labels.assign(batch.labels.begin() + begin, batch.labels.begin() + end);
  return out;
}

ImageBatch gather(const ImageBatch& batch, std::span<const int> indices) {
  ImageBatch out;
  out.pixels = gather_samples(batch.pixels, indices);
  out.labels.reserve(indices.size());
  for (int i : indices) out.labels.push_back(batch.labels.at(static_cast<std::size_t>(i)));
  return out;
}

namespace {

// Glyph membership in coordinates scaled by the glyph radius.
bool inside_glyph(int kind, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  const double box = std::max(au, av);
  switch (kind) {
    case 0: return u * u + v * v <= 1.0;
    case 1: return box <= 0.8;
    case 2: return v >= -0.9 && v <= 0.75 && au <= 0.55 * (v + 0.9);
    case 3: return (au <= 0.28 && av <= 0.95) || (av <= 0.28 && au <= 0.95);
    case 4: return box <= 0.85 && (std::abs(u - v) <= 0.32 || std::abs(u + v) <= 0.32);
    case 5: {
      const double r = std::sqrt(u * u + v * v);
      return r <= 1.0 && r >= 0.55;
    }
    case 6: return au + av <= 1.0;
    case 7: return box <= 0.9 && static_cast<int>(std::floor((v + 0.9) / 0.36)) % 2 == 0;
    case 8: return box <= 0.9 && static_cast<int>(std::floor((u + 0.9) / 0.36)) % 2 == 0;
    case 9: return box <= 0.9 && box >= 0.55;
    default: return false;
  }
}

double luminance(const double* rgb, int channels) {
  if (channels == 1) return rgb[0];
  return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
}

double quantize(double v) {
  return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

}  // namespace

ImageBatch make_toy_shapes(const ToyShapesOptions& o, std::uint64_t seed) {
  if (o.num_samples <= 0 || o.size < 8 || (o.channels != 1 && o.channels != 3) ||
      o.num_classes < 2 || o.num_classes > kToyShapeKinds) {
    throw ConfigError("invalid toy-shapes options");
  }
  ImageBatch out;
  out.pixels = Tensor(Shape{o.num_samples, o.channels, o.size, o.size});
  out.labels.resize(static_cast<std::size_t>(o.num_samples));
  const int s = o.size;
  for (int i = 0; i < o.num_samples; ++i) {
    Rng rng(derive_seed(seed, "toy-shapes", static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int label = static_cast<int>(rng() % static_cast<std::uint64_t>(o.num_classes));
    out.labels[static_cast<std::size_t>(i)] = label;

    double bg[3], fg[3];
    do {
      for (int c = 0; c < 3; ++c) {
        bg[c] = uni(rng);
        fg[c] = uni(rng);
      }
    } while (std::abs(luminance(bg, o.channels) - luminance(fg, o.channels)) < 0.3);
    double grad[3];
    for (double& g : grad) g = 0.25 * (uni(rng) - 0.5);
    const double angle = 2.0 * M_PI * uni(rng);
    const double cx = s * (0.35 + 0.3 * uni(rng));
    const double cy = s * (0.35 + 0.3 * uni(rng));
    const double radius = s * (0.24 + 0.1 * uni(rng));

    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        int hits = 0;
        for (int sy = 0; sy < 2; ++sy) {
          for (int sx = 0; sx < 2; ++sx) {
            const double u = (x + 0.25 + 0.5 * sx - cx) / radius;
            const double v = (y + 0.25 + 0.5 * sy - cy) / radius;
            hits += inside_glyph(label, u, v) ? 1 : 0;
          }
        }
        const double cover = hits / 4.0;
        const double ramp = (std::cos(angle) * (x - s / 2.0) + std::sin(angle) * (y - s / 2.0)) / s;
        for (int c = 0; c < o.channels; ++c) {
          const double back = bg[c] + grad[c] * ramp;
          const double v = cover * fg[c] + (1.0 - cover) * back + o.noise * gauss(rng);
          out.pixels.at(i, c, y, x) = quantize(v);
        }
      }
    }
  }
  return out;
}

void write_image_archive(const fs::path& path, const ImageBatch& batch) {
  const Shape sh = batch.pixels.shape();
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(sh.n) * (1 + sh.sample_size()));
  for (int n = 0; n < sh.n; ++n) {
    const int label = batch.labels.at(static_cast<std::size_t>(n));
    if (label < 0 || label > 255) throw IoError("archive labels must fit in one byte");
    bytes.push_back(static_cast<char>(label));
    for (double v : batch.pixels.sample(n)) {
      bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
  }
  write_file_atomic(path, bytes);
}

ImageBatch read_image_archive(const fs::path& path, int channels, int size) {
  const std::string bytes = read_file(path);
  const std::size_t record = 1 + static_cast<std::size_t>(channels) * size * size;
  if (bytes.empty() || bytes.size() % record != 0) {
    throw IoError(path.string() + ": size " + std::to_string(bytes.size()) +
                  " is not a multiple of the record size " + std::to_string(record));
  }
  const int n = static_cast<int>(bytes.size() / record);
  ImageBatch out;
  out.pixels = Tensor(Shape{n, channels, size, size});
  out.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + static_cast<std::size_t>(i) * record;
    out.labels[static_cast<std::size_t>(i)] = rec[0];
    auto px = out.pixels.sample(i);
    for (std::size_t k = 0; k < px.size(); ++k) px[k] = rec[1 + k] / 255.0;
  }
  return out;
}

void write_png(const fs::path& path, const Tensor& image, int sample) {
  const Shape s = image.shape();
  if (s.c != 1 && s.c != 3) throw ShapeError("write_png needs 1 or 3 channels");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(s.w);
  img.height = static_cast<png_uint_32>(s.h);
  img.format = s.c == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(static_cast<std::size_t>(s.h) * s.w * s.c);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x)
      for (int c = 0; c < s.c; ++c)
        buf[(static_cast<std::size_t>(y) * s.w + x) * s.c + c] = static_cast<unsigned char>(
            std::lround(std::clamp(image.at(sample, c, y, x), 0.0, 1.0) * 255.0));
  png_alloc_size_t len = 0;
  if (!png_image_write_to_memory(&img, nullptr, &len, 0, buf.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + img.message);
  }
  std::string encoded(len, '\0');
  if (!png_image_write_to_memory(&img, encoded.data(), &len, 0, buf.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + img.message);
  }
  encoded.resize(len);
  write_file_atomic(path, encoded);
}

Tensor read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw IoError(path.string() + ": " + img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int c = gray ? 1 : 3;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError(path.string() + ": " + img.message);
  }
  const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
  Tensor out(Shape{1, c, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k)
        out.at(0, k, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * c + k] / 255.0;
  return out;
}

void write_heatmap_png(const fs::path& path, const Tensor& map, int scale) {
  const Shape s = map.shape();
  if (s.n != 1 || s.c != 1 || scale < 1) throw ShapeError("heatmap must be 1 x 1 x H x W");
  const auto [lo_it, hi_it] = std::minmax_element(map.values().begin(), map.values().end());
  const double lo = *lo_it, span = *hi_it - *lo_it;
  Tensor rgb(Shape{1, 3, s.h * scale, s.w * scale});
  for (int y = 0; y < s.h * scale; ++y) {
    for (int x = 0; x < s.w * scale; ++x) {
      const double t = span > 0.0 ? (map.at(0, 0, y / scale, x / scale) - lo) / span : 0.0;
      rgb.at(0, 0, y, x) = t;
      rgb.at(0, 1, y, x) = 1.0 - std::abs(2.0 * t - 1.0);
      rgb.at(0, 2, y, x) = 1.0 - t;
    }
  }
  write_png(path, rgb);
}

std::vector<std::string> default_file_names(int count) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(count));
  char buf[32];
  for (int i = 0; i < count; ++i) {
    std::snprintf(buf, sizeof buf, "%06d.png", i);
    names.emplace_back(buf);
  }
  return names;
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  const auto last = s.find_last_not_of(" \t\r");
  return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
}

}  // namespace

DirectoryDataset load_image_dir(const fs::path& dir) {
  const fs::path csv_path = dir / "labels.csv";
  if (!fs::exists(csv_path)) throw IoError(dir.string() + ": missing labels.csv");
  std::istringstream csv(read_file(csv_path));
  DirectoryDataset ds;
  std::vector<Tensor> images;
  std::string line;
  int line_no = 0;
  while (std::getline(csv, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      ds.failures.push_back("labels.csv:" + std::to_string(line_no) + ": expected filename,class");
      continue;
    }
    const std::string name = trim(line.substr(0, comma));
    const std::string label_text = trim(line.substr(comma + 1));
    int label = -1;
    const auto [ptr, ec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
    if (ec != std::errc() || ptr != label_text.data() + label_text.size()) {
      if (line_no == 1) continue;  // header
      ds.failures.push_back("labels.csv:" + std::to_string(line_no) + ": bad class '" + label_text + "'");
      continue;
    }
    try {
      Tensor img = read_png(dir / name);
      if (!images.empty() && !(img.shape() == images.front().shape())) {
        throw IoError("shape " + img.shape().str() + " differs from " + images.front().shape().str());
      }
      images.push_back(std::move(img));
      ds.files.push_back(name);
      ds.batch.labels.push_back(label);
    } catch (const std::exception& e) {
      ds.failures.push_back(name + ": " + e.what());
    }
  }
  if (images.empty()) throw IoError(dir.string() + ": no readable images");
  const Shape one = images.front().shape();
  ds.batch.pixels = Tensor(Shape{static_cast<int>(images.size()), one.c, one.h, one.w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::copy(images[i].values().begin(), images[i].values().end(),
              ds.batch.pixels.sample(static_cast<int>(i)).begin());
  }
  return ds;
}

void save_image_dir(const fs::path& dir, const ImageBatch& batch,
                    const std::vector<std::string>& files) {
  if (static_cast<int>(files.size()) != batch.size()) throw ShapeError("one file name per image");
  fs::create_directories(dir);
  std::string csv = "filename,class\n";
  for (int n = 0; n < batch.size(); ++n) {
    const auto& name = files[static_cast<std::size_t>(n)];
    write_png(dir / name, batch.pixels, n);
    csv += name + "," + std::to_string(batch.labels[static_cast<std::size_t>(n)]) + "\n";
  }
  write_file_atomic(dir / "labels.csv", csv);
}

DirectoryDataset load_dataset(const fs::path& path, int channels, int size) {
  if (!fs::exists(path)) throw IoError(path.string() + ": no such dataset");
  if (fs::is_directory(path)) return load_image_dir(path);
  DirectoryDataset ds;
  ds.batch = read_image_archive(path, channels, size);
  ds.files = default_file_names(ds.batch.size());
  return ds;
}

}  // namespace ada
