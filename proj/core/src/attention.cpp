#include "ada/attention.hpp"

#include <cmath>

#include "ada/errors.hpp"

namespace ada {

Tensor gap_weights(const Tensor& grad_features) {
  const Shape s = grad_features.shape();
  Tensor w(Shape{s.n, s.c, 1, 1});
  const std::size_t plane = s.plane();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    double sum = 0.0;
    const double* p = grad_features.data() + nc * plane;
    for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    w[nc] = sum / static_cast<double>(plane);
  }
  return w;
}

AttentionMap weight_features(const Tensor& features, const Tensor& weights) {
  const Shape s = features.shape();
  if (weights.shape().n != s.n || weights.shape().c != s.c) {
    throw ShapeError("weight_features: " + weights.shape().str() + " vs " + s.str());
  }
  AttentionMap out{Tensor(s), false};
  const std::size_t plane = s.plane();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    for (std::size_t i = 0; i < plane; ++i) {
      out.values[nc * plane + i] = weights[nc] * features[nc * plane + i];
    }
  }
  return out;
}

AttentionMap channel_normalize(const AttentionMap& raw) {
  const Shape s = raw.values.shape();
  AttentionMap out{Tensor(s), true};
  const std::size_t plane = s.plane();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    const double* p = raw.values.data() + nc * plane;
    double sq = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sq += p[i] * p[i];
    const double denom = std::sqrt(sq) + kChannelNormDelta;
    for (std::size_t i = 0; i < plane; ++i) out.values[nc * plane + i] = p[i] / denom;
  }
  return out;
}

Tensor channel_normalize_backward(const Tensor& raw, const Tensor& grad_normalized) {
  const Shape s = raw.shape();
  Tensor grad(s);
  const std::size_t plane = s.plane();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    const double* r = raw.data() + nc * plane;
    const double* g = grad_normalized.data() + nc * plane;
    double sq = 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      sq += r[i] * r[i];
      dot += g[i] * r[i];
    }
    const double norm = std::sqrt(sq);
    const double denom = norm + kChannelNormDelta;
    // y = r / (|r| + d)  =>  dy/dr = I/(|r|+d) - r r^T / (|r| (|r|+d)^2)
    const double radial = norm > 0.0 ? dot / (norm * denom * denom) : 0.0;
    for (std::size_t i = 0; i < plane; ++i) grad[nc * plane + i] = g[i] / denom - radial * r[i];
  }
  return grad;
}

AttentionPass attention_pass(const Classifier& model, const Tensor& pixels,
                             std::span<const int> class_index, bool channel_norm) {
  if (static_cast<int>(class_index.size()) != pixels.shape().n) {
    throw ShapeError("attention: one class index per sample required");
  }
  for (int t : class_index) {
    if (t < 0 || t >= model.num_classes()) {
      throw ShapeError("attention: class index " + std::to_string(t) + " out of range");
    }
  }
  AttentionPass pass;
  pass.forward = model.forward_with_features(pixels);
  const Tensor& logits = pass.forward.logits();
  Tensor seed(logits.shape());
  for (int n = 0; n < logits.shape().n; ++n) {
    seed.at(n, class_index[static_cast<std::size_t>(n)], 0, 0) = 1.0;
  }
  const Tensor grad_features = model.head_backward(pass.forward, seed);
  pass.weights = gap_weights(grad_features);
  AttentionMap raw = weight_features(pass.forward.features(), pass.weights);
  pass.raw = raw.values;
  pass.map = channel_norm ? channel_normalize(raw) : std::move(raw);
  return pass;
}

AttentionMap attention(const Classifier& model, const ImageBatch& batch) {
  return attention_pass(model, batch.pixels, batch.labels, true).map;
}

AttentionMap attention(const Classifier& model, const ImageBatch& batch,
                       std::span<const int> class_index) {
  return attention_pass(model, batch.pixels, class_index, true).map;
}

Tensor attention_backward(const AttentionPass& pass, const Tensor& grad_map, bool channel_norm) {
  Tensor grad_raw = channel_norm ? channel_normalize_backward(pass.raw, grad_map) : grad_map;
  const Shape s = grad_raw.shape();
  const std::size_t plane = s.plane();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    for (std::size_t i = 0; i < plane; ++i) grad_raw[nc * plane + i] *= pass.weights[nc];
  }
  return grad_raw;
}

std::vector<double> sample_distance(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("distance: " + a.shape().str() + " vs " + b.shape().str());
  }
  std::vector<double> out(static_cast<std::size_t>(a.shape().n));
  for (int n = 0; n < a.shape().n; ++n) {
    auto pa = a.sample(n);
    auto pb = b.sample(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) sq += (pa[i] - pb[i]) * (pa[i] - pb[i]);
    out[static_cast<std::size_t>(n)] = std::sqrt(sq);
  }
  return out;
}

std::vector<double> attention_distance(const AttentionMap& a, const AttentionMap& b) {
  if (a.normalized != b.normalized) {
    throw ShapeError("attention_distance: cannot compare normalized with raw attention");
  }
  return sample_distance(a.values, b.values);
}

Tensor attention_heatmap(const AttentionMap& map, int sample) {
  const Shape s = map.values.shape();
  Tensor out(Shape{1, 1, s.h, s.w});
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) out.at(0, 0, y, x) += std::abs(map.values.at(sample, c, y, x));
    }
  }
  return out;
}

}  // namespace ada
