#include "ada/serialize.hpp"

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "ada/errors.hpp"

namespace ada {

namespace {

constexpr char kMagic[] = "ADACKPT\n";

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(std::random_device{}());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                     const std::vector<const Tensor*>& tensors) {
  nlohmann::json shapes = nlohmann::json::array();
  for (const Tensor* t : tensors) {
    const Shape s = t->shape();
    shapes.push_back({s.n, s.c, s.h, s.w});
  }
  header["format_version"] = kCheckpointVersion;
  header["tensors"] = shapes;
  const std::string head = header.dump();
  std::string blob(kMagic);
  const std::uint64_t len = head.size();
  blob.append(reinterpret_cast<const char*>(&len), sizeof(len));
  blob += head;
  for (const Tensor* t : tensors) {
    blob.append(reinterpret_cast<const char*>(t->data()), t->size() * sizeof(double));
  }
  write_file_atomic(path, blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string blob = read_file(path);
  const std::size_t magic_len = sizeof(kMagic) - 1;
  if (blob.size() < magic_len + sizeof(std::uint64_t) || blob.compare(0, magic_len, kMagic) != 0) {
    throw IoError(path.string() + " is not a checkpoint file");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, blob.data() + magic_len, sizeof(len));
  std::size_t pos = magic_len + sizeof(len);
  if (pos + len > blob.size()) throw IoError(path.string() + ": truncated header");
  Checkpoint ck;
  ck.header = nlohmann::json::parse(blob.substr(pos, len));
  pos += len;
  if (ck.header.value("format_version", 0) != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version");
  }
  for (const auto& dims : ck.header.at("tensors")) {
    const Shape s{dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>(), dims[3].get<int>()};
    Tensor t(s);
    const std::size_t bytes = t.size() * sizeof(double);
    if (pos + bytes > blob.size()) throw IoError(path.string() + ": truncated tensor data");
    std::memcpy(t.data(), blob.data() + pos, bytes);
    pos += bytes;
    ck.tensors.push_back(std::move(t));
  }
  if (pos != blob.size()) throw IoError(path.string() + ": trailing bytes");
  return ck;
}

void save_npy(const std::filesystem::path& path, const Tensor& t) {
  const Shape s = t.shape();
  std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(s.n) +
                     ", " + std::to_string(s.c) + ", " + std::to_string(s.h) + ", " +
                     std::to_string(s.w) + "), }";
  // Header (magic + version + len + dict + newline) is padded to a multiple of 64.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict += '\n';
  std::string blob("\x93NUMPY\x01\x00", 8);
  const auto hlen = static_cast<std::uint16_t>(dict.size());
  blob.push_back(static_cast<char>(hlen & 0xff));
  blob.push_back(static_cast<char>(hlen >> 8));
  blob += dict;
  blob.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  write_file_atomic(path, blob);
}

Tensor load_npy(const std::filesystem::path& path) {
  const std::string blob = read_file(path);
  if (blob.size() < 10 || blob.compare(0, 6, "\x93NUMPY") != 0) {
    throw IoError(path.string() + " is not an .npy file");
  }
  const std::size_t hlen = static_cast<unsigned char>(blob[8]) |
                           (static_cast<std::size_t>(static_cast<unsigned char>(blob[9])) << 8);
  const std::string dict = blob.substr(10, hlen);
  if (dict.find("'<f8'") == std::string::npos || dict.find("False") == std::string::npos) {
    throw IoError(path.string() + ": only little-endian float64 C-order arrays are supported");
  }
  const auto open = dict.find('(');
  const auto close = dict.find(')');
  std::vector<int> dims;
  std::stringstream ss(dict.substr(open + 1, close - open - 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(' ') != std::string::npos) dims.push_back(std::stoi(item));
  }
  while (dims.size() < 4) dims.push_back(1);
  if (dims.size() != 4) throw IoError(path.string() + ": rank above 4");
  Tensor t(Shape{dims[0], dims[1], dims[2], dims[3]});
  const std::size_t pos = 10 + hlen;
  if (blob.size() != pos + t.size() * sizeof(double)) {
    throw IoError(path.string() + ": data size does not match shape");
  }
  std::memcpy(t.data(), blob.data() + pos, t.size() * sizeof(double));
  return t;
}

}  // namespace ada
