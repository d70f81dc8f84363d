#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ada/types.hpp"

namespace ada {

/// SHA-256 over pixel values, shape and labels.
std::string dataset_fingerprint(const ImageBatch& batch);

/// SHA-256 over a newline-joined file list.
std::string file_list_hash(std::span<const std::string> files);

ImageBatch take(const ImageBatch& batch, int begin, int end);
ImageBatch gather(const ImageBatch& batch, std::span<const int> indices);

/// Procedural shapes: one foreground glyph per class over a textured
/// background. Pixels are multiples of 1/255 so 8-bit storage is lossless.
struct ToyShapesOptions {
  int num_samples = 1000;
  int size = 32;
  int channels = 3;
  int num_classes = 10;
  double noise = 0.06;
};
inline constexpr int kToyShapeKinds = 10;

ImageBatch make_toy_shapes(const ToyShapesOptions& options, std::uint64_t seed);

/// Small-image archive: per record one label byte then C*H*W channel-planar bytes.
void write_image_archive(const std::filesystem::path& path, const ImageBatch& batch);
ImageBatch read_image_archive(const std::filesystem::path& path, int channels, int size);

/// 8-bit PNG of one sample (gray or RGB), pixels rounded from [0,1].
void write_png(const std::filesystem::path& path, const Tensor& image, int sample = 0);
/// Returns 1 x C x H x W in [0,1].
Tensor read_png(const std::filesystem::path& path);

/// Single-channel heatmap (1 x 1 x H x W, any range) rendered with a
/// blue-to-red ramp after min-max scaling, nearest-upsampled by `scale`.
void write_heatmap_png(const std::filesystem::path& path, const Tensor& map, int scale = 8);

/// Image directory with labels.csv rows `filename,class`.
struct DirectoryDataset {
  ImageBatch batch;
  std::vector<std::string> files;     // successfully loaded, aligned with batch
  std::vector<std::string> failures;  // "file: reason" for skipped entries
};

DirectoryDataset load_image_dir(const std::filesystem::path& dir);
void save_image_dir(const std::filesystem::path& dir, const ImageBatch& batch,
                    const std::vector<std::string>& files);

/// Directory or archive: a directory needs labels.csv, a file is an archive.
DirectoryDataset load_dataset(const std::filesystem::path& path, int channels = 3, int size = 32);

/// Names "000000.png", "000001.png", ...
std::vector<std::string> default_file_names(int count);

}  // namespace ada
