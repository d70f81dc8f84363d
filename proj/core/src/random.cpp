#include "ada/random.hpp"

namespace ada {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index) {
  // FNV-1a over the stream name keeps the derivation platform independent.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : stream) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return mix_seed(mix_seed(root ^ h) + index);
}

LatentCode sample_latent(Rng& rng, int d_z) {
  std::normal_distribution<double> dist(0.0, 1.0);
  LatentCode z;
  z.values.resize(static_cast<std::size_t>(d_z));
  for (double& v : z.values) v = dist(rng);
  return z;
}

LatentBatch sample_latent_batch(Rng& rng, int n, int d_z) {
  LatentBatch z(Shape{n, d_z, 1, 1});
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : z.values()) v = dist(rng);
  return z;
}

void fill_normal(Tensor& t, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
}

}  // namespace ada
