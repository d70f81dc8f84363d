#pragma once

#include <span>
#include <vector>

#include "ada/model_zoo.hpp"
#include "ada/types.hpp"

namespace ada {

/// Gradient-weighted feature map (N x C x H' x W'), signed, no spatial collapse.
struct AttentionMap {
  Tensor values;
  bool normalized = false;
};

/// Guard added to each channel norm before dividing.
inline constexpr double kChannelNormDelta = 1e-8;

/// Global average pool of dy_t/dF over space: one weight per (sample, channel), N x C x 1 x 1.
Tensor gap_weights(const Tensor& grad_features);

/// alpha (N x C x 1 x 1) broadcast over space times F.
AttentionMap weight_features(const Tensor& features, const Tensor& weights);

/// Divides every (sample, channel) slice by its L2 norm plus kChannelNormDelta.
AttentionMap channel_normalize(const AttentionMap& raw);

/// Backward of channel_normalize: maps d(normalized) to d(raw).
Tensor channel_normalize_backward(const Tensor& raw, const Tensor& grad_normalized);

/// Everything computed on the way to an attention map, kept for backprop.
struct AttentionPass {
  ForwardPass forward;
  Tensor weights;  // alpha_t, N x C x 1 x 1
  Tensor raw;      // alpha_t * F
  AttentionMap map;
};

/// Attention of `model` on `pixels` for per-sample class indices.
/// With `channel_norm` false the raw weighted map is returned (ablation).
AttentionPass attention_pass(const Classifier& model, const Tensor& pixels,
                             std::span<const int> class_index, bool channel_norm = true);

/// Normalized attention for the batch's own ground-truth labels.
AttentionMap attention(const Classifier& model, const ImageBatch& batch);

/// Normalized attention for explicit class indices.
AttentionMap attention(const Classifier& model, const ImageBatch& batch,
                       std::span<const int> class_index);

/// Maps a gradient at the attention map back to a gradient at F.
/// alpha is treated as constant: the head is piecewise linear, so dalpha/dF = 0 a.e.
Tensor attention_backward(const AttentionPass& pass, const Tensor& grad_map, bool channel_norm);

/// Per-sample L2 norm of the flattened difference.
std::vector<double> attention_distance(const AttentionMap& a, const AttentionMap& b);

/// Per-sample L2 distance between equally shaped tensors.
std::vector<double> sample_distance(const Tensor& a, const Tensor& b);

/// Spatial heatmap of one sample: sum over channels of |A|, shape 1 x 1 x H' x W'.
Tensor attention_heatmap(const AttentionMap& map, int sample);

}  // namespace ada
