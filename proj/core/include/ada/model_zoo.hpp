#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ada/nn/sequential.hpp"
#include "ada/types.hpp"

namespace ada {

/// Scalar of one sample's logits. Returns the value and writes d(value)/d(logits).
using LogitObjective =
    std::function<double(std::span<const double> logits, int sample, std::span<double> grad)>;

/// y_t: the pre-softmax logit of each sample's class index.
LogitObjective class_logit_objective(std::span<const int> class_index);

/// Where grad_wrt differentiates to.
enum class GradTarget { Input, Features };

/// One recorded forward pass through a classifier.
struct ForwardPass {
  nn::Activations acts;  // acts[0] = raw pixels, acts.back() = logits
  int feature_slot = 0;  // index into acts of the feature-layer output

  const Tensor& features() const { return acts[static_cast<std::size_t>(feature_slot)]; }
  const Tensor& logits() const { return acts.back(); }
};

/// A classifier with a designated feature layer. Inference never mutates the
/// handle; per-channel input normalization is the network's first layer, so
/// callers always pass raw [0,1] pixels.
class Classifier {
 public:
  Classifier(std::string id, nn::Sequential net, std::string feature_layer, int num_classes,
             Shape input_shape);

  const std::string& id() const { return id_; }
  int num_classes() const { return num_classes_; }
  const std::string& feature_layer() const { return feature_layer_; }
  /// Per-sample input shape (n is ignored).
  const Shape& input_shape() const { return input_shape_; }

  /// Selects a different feature layer; it must produce a rank-4 activation
  /// and the layers after it must be piecewise linear.
  void set_feature_layer(const std::string& name);

  Tensor predict(const Tensor& pixels) const;
  Tensor predict(const ImageBatch& batch) const { return predict(batch.pixels); }

  ForwardPass forward_with_features(const Tensor& pixels, nn::Mode mode = nn::Mode::Eval) const;

  /// Runs only the layers after the feature layer.
  Tensor logits_from_features(const Tensor& features) const;

  /// d/dF of a logit-space seed gradient (backprop through the head only).
  Tensor head_backward(const ForwardPass& pass, const Tensor& d_logits,
                       nn::Mode mode = nn::Mode::Eval) const;

  /// d/dx given a gradient at the feature layer (backprop through the trunk only).
  Tensor trunk_backward(const ForwardPass& pass, const Tensor& d_features,
                        nn::Mode mode = nn::Mode::Eval, nn::Gradients* grads = nullptr) const;

  /// Full backward from logits to pixels, optionally accumulating parameter gradients.
  Tensor input_backward(const ForwardPass& pass, const Tensor& d_logits,
                        nn::Mode mode = nn::Mode::Eval, nn::Gradients* grads = nullptr) const;

  /// Gradient of sum_n objective(logits_n) with respect to the input or features.
  Tensor grad_wrt(const Tensor& pixels, const LogitObjective& objective, GradTarget target) const;

  nn::Sequential& network() { return net_; }
  const nn::Sequential& network() const { return net_; }

  /// SHA-256 over all state tensors; used to prove a model was not modified.
  std::string weights_hash() const;

  void save(const std::filesystem::path& path) const;
  static Classifier load(const std::filesystem::path& path);

 private:
  void check_input(const Shape& s) const;

  std::string id_;
  nn::Sequential net_;
  std::string feature_layer_;
  int feature_index_ = -1;
  int num_classes_;
  Shape input_shape_;
};

/// Which toy architecture to build.
enum class ToyArch { CnnA, CnnB, LinearProbe };

std::string to_string(ToyArch arch);
ToyArch parse_toy_arch(const std::string& text);

/// Small CNN: per stride-2 3x3 convolution a ReLU; the last ReLU is the feature
/// layer, followed by a hidden fully-connected ReLU layer and the logit layer.
Classifier make_small_cnn(const std::string& id, int channels, int size,
                          const std::vector<int>& conv_widths, int hidden, int num_classes,
                          std::uint64_t seed);

/// Desk-scale suite members (defaults sized for 3 x 32 x 32 inputs).
Classifier make_toy_model(ToyArch arch, const std::string& id, int channels, int size,
                          int num_classes, std::uint64_t seed);

/// Manifest of saved classifiers in a model directory (manifest.json).
struct ModelEntry {
  std::string id;
  std::string checkpoint;  // relative to the directory
  std::string feature_layer;
  int num_classes = 0;
};

class ModelZoo {
 public:
  explicit ModelZoo(std::filesystem::path dir);

  /// Loads manifest.json if present.
  static ModelZoo open(const std::filesystem::path& dir);

  /// Saves the classifier's checkpoint and (re)writes the manifest.
  void add(const Classifier& model);

  bool contains(const std::string& id) const;
  Classifier load(const std::string& id) const;
  const std::vector<ModelEntry>& entries() const { return entries_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  void write_manifest() const;

  std::filesystem::path dir_;
  std::vector<ModelEntry> entries_;
};

}  // namespace ada
