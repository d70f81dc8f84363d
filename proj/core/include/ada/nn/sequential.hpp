#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ada/nn/layers.hpp"

namespace ada::nn {

/// acts[0] is the network input; acts[i + 1] is the output of layer i.
using Activations = std::vector<Tensor>;

/// Gradient buffers aligned with Sequential::params().
using Gradients = std::vector<Tensor>;

/// Named chain of layers with value semantics (copies deep-clone the layers).
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(std::string name, std::unique_ptr<Layer> layer);

  int size() const { return static_cast<int>(layers_.size()); }
  const std::string& name(int i) const { return names_[static_cast<std::size_t>(i)]; }
  Layer& layer(int i) { return *layers_[static_cast<std::size_t>(i)]; }
  const Layer& layer(int i) const { return *layers_[static_cast<std::size_t>(i)]; }
  /// Index of the layer with this name, or -1.
  int find(const std::string& name) const;

  /// Runs layers [begin, end) on `in`, recording every intermediate.
  Activations forward(const Tensor& in, Mode mode, int begin = 0, int end = -1) const;

  /// Backpropagates through layers [begin, end) given acts from forward() over
  /// the same range. Returns dL/d(input of layer `begin`).
  Tensor backward(const Activations& acts, const Tensor& grad_out, Mode mode, int begin = 0,
                  int end = -1, Gradients* grads = nullptr) const;

  /// Updates running statistics of normalization layers from a train-mode pass.
  void update_running_stats(const Activations& acts, int begin = 0);

  std::vector<Tensor*> params();
  std::vector<Tensor*> state();
  Gradients zero_gradients();
  std::size_t num_params();

  /// True if every layer in [begin, end) is piecewise linear.
  bool piecewise_linear(int begin, int end = -1) const;

  nlohmann::json describe() const;
  static Sequential from_json(const nlohmann::json& j);

 private:
  int resolve_end(int end) const { return end < 0 ? size() : end; }
  std::size_t param_offset(int layer_index);

  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::string> names_;
};

}  // namespace ada::nn
