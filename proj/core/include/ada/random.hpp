#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ada/tensor.hpp"
#include "ada/types.hpp"

namespace ada {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Child seed for a named stream and index under a root seed.
/// Streams separate latent sampling, shuffling, initialization, etc.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

/// Standard-normal latent code of length d_z.
LatentCode sample_latent(Rng& rng, int d_z);

/// N independent standard-normal codes.
LatentBatch sample_latent_batch(Rng& rng, int n, int d_z);

/// Fills a tensor with N(0, stddev^2) draws.
void fill_normal(Tensor& t, Rng& rng, double stddev);

}  // namespace ada
