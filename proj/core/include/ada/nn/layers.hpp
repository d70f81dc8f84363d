#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ada/random.hpp"
#include "ada/tensor.hpp"

namespace ada::nn {

enum class Mode { Eval, Train };

/// A differentiable stage. Layers keep no per-call state: backward receives the
/// forward input and output again, so a frozen layer can serve concurrent callers.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor forward(const Tensor& in, Mode mode) const = 0;

  /// Returns dL/d(in). When `param_grads` is non-empty it is aligned with
  /// params() and receives accumulated dL/d(param).
  virtual Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                          std::span<Tensor> param_grads) const = 0;

  virtual std::vector<Tensor*> params() { return {}; }
  std::vector<const Tensor*> params() const;

  /// Parameters plus non-trainable buffers; everything a checkpoint stores.
  virtual std::vector<Tensor*> state() { return params(); }

  /// Running-statistics update for normalization layers, called by trainers.
  virtual void update_running_stats(const Tensor& /*in*/) {}

  /// True when the map is piecewise linear in its input (a.e. zero curvature).
  virtual bool piecewise_linear() const { return true; }

  virtual nlohmann::json describe() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
};

/// Rebuilds an (uninitialized-weights) layer from describe() output.
std::unique_ptr<Layer> layer_from_json(const nlohmann::json& j);

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int padding = 0;

  int out_size(int in) const { return (in + 2 * padding - kernel) / stride + 1; }
  int transposed_out_size(int in) const { return (in - 1) * stride - 2 * padding + kernel; }
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, ConvGeometry geom, bool bias = true);

  std::string kind() const override { return "conv2d"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& in, Mode mode) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  std::span<Tensor> param_grads) const override;
  std::vector<Tensor*> params() override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

  Tensor& weight() { return weight_; }
  const Tensor& weight() const { return weight_; }
  Tensor& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

 private:
  int in_, out_;
  ConvGeometry geom_;
  bool has_bias_;
  Tensor weight_;  // out x in x k x k
  Tensor bias_;    // 1 x out x 1 x 1
};

/// Fractionally strided convolution; the adjoint of Conv2d with the same geometry.
class ConvTranspose2d final : public Layer {
 public:
  ConvTranspose2d(int in_channels, int out_channels, ConvGeometry geom, bool bias = true);

  std::string kind() const override { return "conv_transpose2d"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& in, Mode mode) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  std::span<Tensor> param_grads) const override;
  std::vector<Tensor*> params() override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvTranspose2d>(*this); }

  Tensor& weight() { return weight_; }

 private:
  int in_, out_;
  ConvGeometry geom_;
  bool has_bias_;
  Tensor weight_;  // in x out x k x k
  Tensor bias_;
};

/// Per-channel batch normalization. Train mode normalizes with batch
/// statistics; eval mode with the running estimates.
class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int channels, double eps = 1e-5, double momentum = 0.1);

  std::string kind() const override { return "batch_norm2d"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& in, Mode mode) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  std::span<Tensor> param_grads) const override;
  std::vector<Tensor*> params() override { return {&gamma_, &beta_}; }
  std::vector<Tensor*> state() override { return {&gamma_, &beta_, &running_mean_, &running_var_}; }
  void update_running_stats(const Tensor& in) override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm2d>(*this); }

 private:
  void batch_stats(const Tensor& in, std::vector<double>& mean, std::vector<double>& var) const;

  int channels_;
  double eps_, momentum_;
  Tensor gamma_, beta_, running_mean_, running_var_;
};

class ReLU final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& in, Mode mode) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  std::span<Tensor> param_grads) const override;
  nlohmann::json describe() const override { return {{"type", kind()}}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }
};

class Tanh final : public Layer {
 public:
  std::string kind() const override { return "tanh"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& in, Mode mode) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  std::span<Tensor> param_grads) const override;
  bool piecewise_linear() const override { return false; }
  nlohmann::json describe() const override { return {{"type", kind()}}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Tanh>(*this); }
};

/// Fully connected layer over the flattened C*H*W sample; output is N x out x 1 x 1.
class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features);

  std::string kind() const override { return "linear"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& in, Mode mode) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  std::span<Tensor> param_grads) const override;
  std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }

  Tensor& weight() { return weight_; }
  const Tensor& weight() const { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  int in_, out_;
  Tensor weight_;  // out x in
  Tensor bias_;
};

/// Fixed per-channel (x - mean) / std; lets attacks work in raw [0,1] space.
class Normalize final : public Layer {
 public:
  Normalize(std::vector<double> mean, std::vector<double> stddev);

  std::string kind() const override { return "normalize"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& in, Mode mode) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, Mode mode,
                  std::span<Tensor> param_grads) const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Normalize>(*this); }

 private:
  std::vector<double> mean_, std_;
};

/// He-normal weights and zero biases for every conv / linear layer.
void init_he_normal(Layer& layer, Rng& rng);

/// N(0, stddev^2) weights for conv layers, zero biases.
void init_normal(Layer& layer, Rng& rng, double stddev);

}  // namespace ada::nn
