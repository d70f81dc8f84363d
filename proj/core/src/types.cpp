#include "ada/types.hpp"

#include <algorithm>
#include <cmath>

#include "ada/errors.hpp"

namespace ada {

const ImageBatch& validate_batch(const ImageBatch& batch, std::optional<int> num_classes) {
  const Shape s = batch.pixels.shape();
  if (s.c != 1 && s.c != 3) {
    throw ValidationError(ValidationError::Kind::Channels, -1,
                          "image batch has " + std::to_string(s.c) + " channels; expected 1 or 3");
  }
  if (static_cast<int>(batch.labels.size()) != s.n) {
    throw ValidationError(ValidationError::Kind::LabelMismatch, -1,
                          "labels length " + std::to_string(batch.labels.size()) +
                              " does not match batch size " + std::to_string(s.n));
  }
  for (int n = 0; n < s.n; ++n) {
    for (double p : batch.pixels.sample(n)) {
      if (!std::isfinite(p)) {
        throw ValidationError(ValidationError::Kind::NonFinite, n,
                              "non-finite pixel in sample " + std::to_string(n));
      }
      if (p < 0.0 || p > 1.0) {
        throw ValidationError(ValidationError::Kind::Range, n,
                              "pixel value " + std::to_string(p) + " outside [0,1] in sample " +
                                  std::to_string(n));
      }
    }
    const int label = batch.labels[static_cast<std::size_t>(n)];
    if (label < 0 || (num_classes && label >= *num_classes)) {
      throw ValidationError(ValidationError::Kind::LabelRange, n,
                            "label " + std::to_string(label) + " out of range in sample " +
                                std::to_string(n));
    }
  }
  return batch;
}

EpsilonScale parse_epsilon_scale(std::string_view text) {
  if (text == "0-255") return EpsilonScale::Byte255;
  if (text == "0-1") return EpsilonScale::Unit;
  throw ConfigError("unknown epsilon scale '" + std::string(text) + "' (use 0-255 or 0-1)");
}

std::string to_string(EpsilonScale scale) {
  return scale == EpsilonScale::Byte255 ? "0-255" : "0-1";
}

AttackBudget convert_epsilon(double raw, EpsilonScale scale) {
  if (!std::isfinite(raw) || raw < 0.0) {
    throw ConfigError("epsilon must be a nonnegative number, got " + std::to_string(raw));
  }
  const double eps = scale == EpsilonScale::Byte255 ? raw / 255.0 : raw;
  if (eps > 1.0) {
    throw ConfigError("epsilon " + std::to_string(raw) + " on scale " + to_string(scale) +
                      " exceeds the [0,1] pixel range");
  }
  return AttackBudget{eps};
}

Tensor project_to_budget(const Tensor& candidate, const Tensor& origin, AttackBudget budget) {
  if (!(candidate.shape() == origin.shape())) {
    throw ShapeError("project_to_budget: " + candidate.shape().str() + " vs " + origin.shape().str());
  }
  Tensor out(candidate.shape());
  const double eps = budget.epsilon;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double lo = origin[i] - eps;
    const double hi = origin[i] + eps;
    double v = std::min(std::max(candidate[i], lo), hi);
    out[i] = std::min(std::max(v, 0.0), 1.0);
  }
  return out;
}

LatentBatch broadcast_latent(const LatentCode& z, int batch_size) {
  LatentBatch out(Shape{batch_size, z.size(), 1, 1});
  for (int n = 0; n < batch_size; ++n) {
    auto row = out.sample(n);
    std::copy(z.values.begin(), z.values.end(), row.begin());
  }
  return out;
}

LatentCode latent_row(const LatentBatch& z, int n) {
  auto row = z.sample(n);
  return LatentCode{{row.begin(), row.end()}};
}

}  // namespace ada
