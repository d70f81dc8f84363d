#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ada/tensor.hpp"

namespace ada {

/// Images in [0,1] (N x C x H x W) with one ground-truth class per sample.
struct ImageBatch {
  Tensor pixels;
  std::vector<int> labels;

  int size() const { return pixels.shape().n; }
};

/// Checks every ImageBatch invariant and returns the batch unchanged.
/// Throws ValidationError naming the first offending sample.
const ImageBatch& validate_batch(const ImageBatch& batch,
                                 std::optional<int> num_classes = std::nullopt);

/// Pixel scale a raw epsilon is expressed in.
enum class EpsilonScale { Byte255, Unit };

EpsilonScale parse_epsilon_scale(std::string_view text);
std::string to_string(EpsilonScale scale);

/// L-infinity budget in [0,1] pixel units.
struct AttackBudget {
  double epsilon = 0.0;
};

/// The single place where byte-scale budgets become unit-scale.
AttackBudget convert_epsilon(double raw, EpsilonScale scale);

/// Clip to the epsilon-ball around `origin`, then to [0,1] (per pixel).
Tensor project_to_budget(const Tensor& candidate, const Tensor& origin, AttackBudget budget);

/// One latent vector; the generator broadcasts it spatially.
struct LatentCode {
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }
};

/// Per-sample latent codes, shape N x d_z x 1 x 1.
using LatentBatch = Tensor;

/// Repeats one code for every sample of a batch.
LatentBatch broadcast_latent(const LatentCode& z, int batch_size);

/// Row `n` of a latent batch as a code.
LatentCode latent_row(const LatentBatch& z, int n);

}  // namespace ada
