#include "ada/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "ada/errors.hpp"

namespace ada::nn {

namespace {

using Mat = Eigen::Map<Eigen::MatrixXd>;
using ConstMat = Eigen::Map<const Eigen::MatrixXd>;

// Column buffer layout: P x K column-major, P = output positions, K = (channel, ky, kx).
void im2col(const double* img, int channels, int height, int width, const ConvGeometry& g,
            int out_h, int out_w, double* col) {
  const int positions = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        double* dst = col + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * positions;
        const double* plane = img + static_cast<std::size_t>(c) * height * width;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          double* row = dst + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(row, row + out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            row[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters (accumulates) a column buffer back into an image.
void col2im(const double* col, int channels, int height, int width, const ConvGeometry& g,
            int out_h, int out_w, double* img) {
  const int positions = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const double* src =
            col + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * positions;
        double* plane = img + static_cast<std::size_t>(c) * height * width;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= height) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * width;
          const double* row = src + oy * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < width) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

void require_channels(const Shape& in, int expected, const std::string& who) {
  if (in.c != expected) {
    throw ShapeError(who + ": expected " + std::to_string(expected) + " input channels, got " +
                     in.str());
  }
}

nlohmann::json geometry_json(const ConvGeometry& g) {
  return {{"kernel", g.kernel}, {"stride", g.stride}, {"padding", g.padding}};
}

}  // namespace

std::vector<const Tensor*> Layer::params() const {
  auto mutable_params = const_cast<Layer*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, ConvGeometry geom, bool bias)
    : in_(in_channels),
      out_(out_channels),
      geom_(geom),
      has_bias_(bias),
      weight_(Shape{out_channels, in_channels, geom.kernel, geom.kernel}),
      bias_(Shape{1, bias ? out_channels : 0, 1, 1}) {}

Shape Conv2d::output_shape(const Shape& in) const {
  require_channels(in, in_, "conv2d");
  const int oh = geom_.out_size(in.h);
  const int ow = geom_.out_size(in.w);
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: input " + in.str() + " too small");
  return Shape{in.n, out_, oh, ow};
}

Tensor Conv2d::forward(const Tensor& in, Mode) const {
  const Shape s = in.shape();
  const Shape os = output_shape(s);
  const int positions = os.h * os.w;
  const int k = in_ * geom_.kernel * geom_.kernel;
  Tensor out(os);
  std::vector<double> col(static_cast<std::size_t>(positions) * k);
  ConstMat w(weight_.data(), k, out_);
  for (int n = 0; n < s.n; ++n) {
    im2col(in.sample(n).data(), in_, s.h, s.w, geom_, os.h, os.w, col.data());
    Mat o(out.sample(n).data(), positions, out_);
    o.noalias() = ConstMat(col.data(), positions, k) * w;
    if (has_bias_) {
      for (int c = 0; c < out_; ++c) o.col(c).array() += bias_[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode,
                        std::span<Tensor> param_grads) const {
  const Shape s = in.shape();
  const Shape os = grad_out.shape();
  const int positions = os.h * os.w;
  const int k = in_ * geom_.kernel * geom_.kernel;
  const bool want_params = !param_grads.empty();
  Tensor grad_in(s);
  std::vector<double> col(static_cast<std::size_t>(positions) * k);
  ConstMat w(weight_.data(), k, out_);
  for (int n = 0; n < s.n; ++n) {
    ConstMat go(grad_out.sample(n).data(), positions, out_);
    if (want_params) {
      im2col(in.sample(n).data(), in_, s.h, s.w, geom_, os.h, os.w, col.data());
      Mat gw(param_grads[0].data(), k, out_);
      gw.noalias() += ConstMat(col.data(), positions, k).transpose() * go;
      if (has_bias_) {
        for (int c = 0; c < out_; ++c) param_grads[1][static_cast<std::size_t>(c)] += go.col(c).sum();
      }
    }
    Mat dcol(col.data(), positions, k);
    dcol.noalias() = go * w.transpose();
    col2im(col.data(), in_, s.h, s.w, geom_, os.h, os.w, grad_in.sample(n).data());
  }
  return grad_in;
}

std::vector<Tensor*> Conv2d::params() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

nlohmann::json Conv2d::describe() const {
  return {{"type", kind()}, {"in", in_}, {"out", out_}, {"geometry", geometry_json(geom_)},
          {"bias", has_bias_}};
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, ConvGeometry geom, bool bias)
    : in_(in_channels),
      out_(out_channels),
      geom_(geom),
      has_bias_(bias),
      weight_(Shape{in_channels, out_channels, geom.kernel, geom.kernel}),
      bias_(Shape{1, bias ? out_channels : 0, 1, 1}) {}

Shape ConvTranspose2d::output_shape(const Shape& in) const {
  require_channels(in, in_, "conv_transpose2d");
  return Shape{in.n, out_, geom_.transposed_out_size(in.h), geom_.transposed_out_size(in.w)};
}

Tensor ConvTranspose2d::forward(const Tensor& in, Mode) const {
  const Shape s = in.shape();
  const Shape os = output_shape(s);
  const int positions = s.h * s.w;
  const int k = out_ * geom_.kernel * geom_.kernel;
  Tensor out(os);
  std::vector<double> col(static_cast<std::size_t>(positions) * k);
  ConstMat w(weight_.data(), k, in_);
  for (int n = 0; n < s.n; ++n) {
    Mat c(col.data(), positions, k);
    c.noalias() = ConstMat(in.sample(n).data(), positions, in_) * w.transpose();
    col2im(col.data(), out_, os.h, os.w, geom_, s.h, s.w, out.sample(n).data());
    if (has_bias_) {
      Mat o(out.sample(n).data(), os.h * os.w, out_);
      for (int ch = 0; ch < out_; ++ch) o.col(ch).array() += bias_[static_cast<std::size_t>(ch)];
    }
  }
  return out;
}

Tensor ConvTranspose2d::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode,
                                 std::span<Tensor> param_grads) const {
  const Shape s = in.shape();
  const Shape os = grad_out.shape();
  const int positions = s.h * s.w;
  const int k = out_ * geom_.kernel * geom_.kernel;
  const bool want_params = !param_grads.empty();
  Tensor grad_in(s);
  std::vector<double> col(static_cast<std::size_t>(positions) * k);
  ConstMat w(weight_.data(), k, in_);
  for (int n = 0; n < s.n; ++n) {
    im2col(grad_out.sample(n).data(), out_, os.h, os.w, geom_, s.h, s.w, col.data());
    ConstMat dcol(col.data(), positions, k);
    Mat gi(grad_in.sample(n).data(), positions, in_);
    gi.noalias() = dcol * w;
    if (want_params) {
      Mat gw(param_grads[0].data(), k, in_);
      gw.noalias() += dcol.transpose() * ConstMat(in.sample(n).data(), positions, in_);
      if (has_bias_) {
        ConstMat go(grad_out.sample(n).data(), os.h * os.w, out_);
        for (int ch = 0; ch < out_; ++ch) param_grads[1][static_cast<std::size_t>(ch)] += go.col(ch).sum();
      }
    }
  }
  return grad_in;
}

std::vector<Tensor*> ConvTranspose2d::params() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

nlohmann::json ConvTranspose2d::describe() const {
  return {{"type", kind()}, {"in", in_}, {"out", out_}, {"geometry", geometry_json(geom_)},
          {"bias", has_bias_}};
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_(Shape{1, channels, 1, 1}, 1.0),
      beta_(Shape{1, channels, 1, 1}, 0.0),
      running_mean_(Shape{1, channels, 1, 1}, 0.0),
      running_var_(Shape{1, channels, 1, 1}, 1.0) {}

void BatchNorm2d::batch_stats(const Tensor& in, std::vector<double>& mean,
                              std::vector<double>& var) const {
  const Shape s = in.shape();
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n) * static_cast<double>(plane);
  mean.assign(static_cast<std::size_t>(channels_), 0.0);
  var.assign(static_cast<std::size_t>(channels_), 0.0);
  for (int c = 0; c < channels_; ++c) {
    double sum = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const double* p = in.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    }
    const double m = sum / count;
    double sq = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const double* p = in.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - m) * (p[i] - m);
    }
    mean[static_cast<std::size_t>(c)] = m;
    var[static_cast<std::size_t>(c)] = sq / count;
  }
}

Tensor BatchNorm2d::forward(const Tensor& in, Mode mode) const {
  require_channels(in.shape(), channels_, "batch_norm2d");
  const Shape s = in.shape();
  const std::size_t plane = s.plane();
  std::vector<double> mean, var;
  if (mode == Mode::Train) {
    batch_stats(in, mean, var);
  } else {
    mean.assign(running_mean_.values().begin(), running_mean_.values().end());
    var.assign(running_var_.values().begin(), running_var_.values().end());
  }
  Tensor out(s);
  for (int c = 0; c < channels_; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const double scale = gamma_[ci] / std::sqrt(var[ci] + eps_);
    const double shift = beta_[ci] - mean[ci] * scale;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + ci) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[off + i] = in[off + i] * scale + shift;
    }
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode mode,
                             std::span<Tensor> param_grads) const {
  const Shape s = in.shape();
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n) * static_cast<double>(plane);
  const bool want_params = !param_grads.empty();
  std::vector<double> mean, var;
  if (mode == Mode::Train) {
    batch_stats(in, mean, var);
  } else {
    mean.assign(running_mean_.values().begin(), running_mean_.values().end());
    var.assign(running_var_.values().begin(), running_var_.values().end());
  }
  Tensor grad_in(s);
  for (int c = 0; c < channels_; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const double inv_std = 1.0 / std::sqrt(var[ci] + eps_);
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + ci) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double xhat = (in[off + i] - mean[ci]) * inv_std;
        sum_dy += grad_out[off + i];
        sum_dy_xhat += grad_out[off + i] * xhat;
      }
    }
    if (want_params) {
      param_grads[0][ci] += sum_dy_xhat;
      param_grads[1][ci] += sum_dy;
    }
    const double g = gamma_[ci] * inv_std;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + ci) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (mode == Mode::Train) {
          const double xhat = (in[off + i] - mean[ci]) * inv_std;
          grad_in[off + i] = g * (grad_out[off + i] - sum_dy / count - xhat * sum_dy_xhat / count);
        } else {
          grad_in[off + i] = g * grad_out[off + i];
        }
      }
    }
  }
  return grad_in;
}

void BatchNorm2d::update_running_stats(const Tensor& in) {
  std::vector<double> mean, var;
  batch_stats(in, mean, var);
  const double count = static_cast<double>(in.shape().n) * static_cast<double>(in.shape().plane());
  const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
  for (std::size_t c = 0; c < mean.size(); ++c) {
    running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean[c];
    running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * var[c] * unbias;
  }
}

nlohmann::json BatchNorm2d::describe() const {
  return {{"type", kind()}, {"channels", channels_}, {"eps", eps_}, {"momentum", momentum_}};
}

// ------------------------------------------------------ pointwise layers

Tensor ReLU::forward(const Tensor& in, Mode) const {
  Tensor out = in;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor ReLU::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode,
                      std::span<Tensor>) const {
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!(in[i] > 0.0)) grad_in[i] = 0.0;
  }
  return grad_in;
}

Tensor Tanh::forward(const Tensor& in, Mode) const {
  Tensor out = in;
  for (double& v : out.values()) v = std::tanh(v);
  return out;
}

Tensor Tanh::backward(const Tensor&, const Tensor& out, const Tensor& grad_out, Mode,
                      std::span<Tensor>) const {
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < out.size(); ++i) grad_in[i] *= 1.0 - out[i] * out[i];
  return grad_in;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features)
    : in_(in_features),
      out_(out_features),
      weight_(Shape{out_features, in_features, 1, 1}),
      bias_(Shape{1, out_features, 1, 1}) {}

Shape Linear::output_shape(const Shape& in) const {
  if (static_cast<int>(in.sample_size()) != in_) {
    throw ShapeError("linear: expected " + std::to_string(in_) + " features per sample, got " +
                     in.str());
  }
  return Shape{in.n, out_, 1, 1};
}

Tensor Linear::forward(const Tensor& in, Mode) const {
  const Shape os = output_shape(in.shape());
  Tensor out(os);
  ConstMat x(in.data(), in_, os.n);
  ConstMat w(weight_.data(), in_, out_);
  Mat o(out.data(), out_, os.n);
  o.noalias() = w.transpose() * x;
  o.colwise() += Eigen::Map<const Eigen::VectorXd>(bias_.data(), out_);
  return out;
}

Tensor Linear::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode,
                        std::span<Tensor> param_grads) const {
  const int n = in.shape().n;
  Tensor grad_in(in.shape());
  ConstMat go(grad_out.data(), out_, n);
  ConstMat w(weight_.data(), in_, out_);
  Mat gi(grad_in.data(), in_, n);
  gi.noalias() = w * go;
  if (!param_grads.empty()) {
    Mat gw(param_grads[0].data(), in_, out_);
    gw.noalias() += ConstMat(in.data(), in_, n) * go.transpose();
    Eigen::Map<Eigen::VectorXd>(param_grads[1].data(), out_) += go.rowwise().sum();
  }
  return grad_in;
}

nlohmann::json Linear::describe() const {
  return {{"type", kind()}, {"in", in_}, {"out", out_}};
}

// ------------------------------------------------------------- Normalize

Normalize::Normalize(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), std_(std::move(stddev)) {
  if (mean_.size() != std_.size() || mean_.empty()) {
    throw ShapeError("normalize: mean/std length mismatch");
  }
  for (double sd : std_) {
    if (!(sd > 0.0)) throw ShapeError("normalize: std must be positive");
  }
}

Tensor Normalize::forward(const Tensor& in, Mode) const {
  const Shape s = in.shape();
  require_channels(s, static_cast<int>(mean_.size()), "normalize");
  Tensor out(s);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
      const auto ci = static_cast<std::size_t>(c);
      for (std::size_t i = 0; i < plane; ++i) out[off + i] = (in[off + i] - mean_[ci]) / std_[ci];
    }
  }
  return out;
}

Tensor Normalize::backward(const Tensor& in, const Tensor&, const Tensor& grad_out, Mode,
                           std::span<Tensor>) const {
  const Shape s = in.shape();
  Tensor grad_in(s);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
      const double inv = 1.0 / std_[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < plane; ++i) grad_in[off + i] = grad_out[off + i] * inv;
    }
  }
  return grad_in;
}

nlohmann::json Normalize::describe() const {
  return {{"type", kind()}, {"mean", mean_}, {"std", std_}};
}

// --------------------------------------------------------------- factory

std::unique_ptr<Layer> layer_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  auto geometry = [&j] {
    const auto& g = j.at("geometry");
    return ConvGeometry{g.at("kernel").get<int>(), g.at("stride").get<int>(),
                        g.at("padding").get<int>()};
  };
  if (type == "conv2d") {
    return std::make_unique<Conv2d>(j.at("in").get<int>(), j.at("out").get<int>(), geometry(),
                                    j.at("bias").get<bool>());
  }
  if (type == "conv_transpose2d") {
    return std::make_unique<ConvTranspose2d>(j.at("in").get<int>(), j.at("out").get<int>(),
                                             geometry(), j.at("bias").get<bool>());
  }
  if (type == "batch_norm2d") {
    return std::make_unique<BatchNorm2d>(j.at("channels").get<int>(), j.at("eps").get<double>(),
                                         j.at("momentum").get<double>());
  }
  if (type == "relu") return std::make_unique<ReLU>();
  if (type == "tanh") return std::make_unique<Tanh>();
  if (type == "linear") {
    return std::make_unique<Linear>(j.at("in").get<int>(), j.at("out").get<int>());
  }
  if (type == "normalize") {
    return std::make_unique<Normalize>(j.at("mean").get<std::vector<double>>(),
                                       j.at("std").get<std::vector<double>>());
  }
  throw IoError("unknown layer type '" + type + "'");
}

// ---------------------------------------------------------- initializers

void init_he_normal(Layer& layer, Rng& rng) {
  auto ps = layer.params();
  if (ps.empty()) return;
  if (layer.kind() == "batch_norm2d") return;
  Tensor& w = *ps[0];
  const Shape s = w.shape();
  // Conv2d / Linear weights are out x fan_in...; transposed conv is in x out x k x k.
  const double fan_in = layer.kind() == "conv_transpose2d"
                            ? static_cast<double>(s.n) * s.h * s.w
                            : static_cast<double>(s.c) * s.h * s.w;
  fill_normal(w, rng, std::sqrt(2.0 / fan_in));
  for (std::size_t i = 1; i < ps.size(); ++i) ps[i]->fill(0.0);
}

void init_normal(Layer& layer, Rng& rng, double stddev) {
  auto ps = layer.params();
  if (ps.empty() || layer.kind() == "batch_norm2d") return;
  fill_normal(*ps[0], rng, stddev);
  for (std::size_t i = 1; i < ps.size(); ++i) ps[i]->fill(0.0);
}

}  // namespace ada::nn
