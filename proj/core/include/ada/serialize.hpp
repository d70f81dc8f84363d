#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ada/tensor.hpp"

namespace ada {

/// Writes `content` to a temp file beside `path`, then renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

inline constexpr int kCheckpointVersion = 1;

/// A checkpoint is a magic line, a JSON header, and raw little-endian doubles
/// for each tensor listed in the header.
struct Checkpoint {
  nlohmann::json header;
  std::vector<Tensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                     const std::vector<const Tensor*>& tensors);

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Minimal NumPy .npy (v1.0, '<f8', C order) writer/reader for float sidecars.
void save_npy(const std::filesystem::path& path, const Tensor& t);
Tensor load_npy(const std::filesystem::path& path);

}  // namespace ada
