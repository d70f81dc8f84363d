#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "ada/generator.hpp"
#include "ada/model_zoo.hpp"
#include "ada/random.hpp"
#include "ada/types.hpp"

namespace ada::test {

inline ImageBatch random_batch(int n, int c, int size, int classes, std::uint64_t seed) {
  ImageBatch b;
  b.pixels = Tensor(Shape{n, c, size, size});
  Rng rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (double& v : b.pixels.values()) v = uni(rng);
  for (int i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(classes)));
  return b;
}

// 8x8 RGB input, two stride-2 convs (feature map 6 x 2 x 2), five classes.
inline Classifier tiny_cnn(std::uint64_t seed) {
  return make_small_cnn("tiny", 3, 8, {4, 6}, 8, 5, seed);
}

// Under 1k parameters; batch-norm affine terms are randomized so that no
// activation sits exactly on a ReLU kink.
inline GeneratorNet tiny_generator(std::uint64_t seed, int d_z = 2) {
  GeneratorConfig cfg;
  cfg.image_channels = 3;
  cfg.d_z = d_z;
  cfg.widths = {2, 2, 3};
  GeneratorNet net(cfg, seed);
  Rng rng(seed + 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Tensor* p : net.params()) {
    for (double& v : p->values()) v = 0.4 * gauss(rng);
  }
  return net;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ada_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ada::test
