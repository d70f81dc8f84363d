#include "ada/nn/optim.hpp"

#include <cmath>

#include "ada/errors.hpp"

namespace ada::nn {

Adam::Adam(std::vector<Tensor*> params, Options options) : params_(std::move(params)), opt_(options) {
  for (Tensor* p : params_) {
    m_.emplace_back(p->shape());
    v_.emplace_back(p->shape());
  }
}

void Adam::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size()) throw ShapeError("adam: gradient count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    const Tensor& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + opt_.weight_decay * p[i];
      m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * gi;
      v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= opt_.learning_rate * mhat / (std::sqrt(vhat) + opt_.eps);
    }
  }
}

Sgd::Sgd(std::vector<Tensor*> params, Options options) : params_(std::move(params)), opt_(options) {
  for (Tensor* p : params_) velocity_.emplace_back(p->shape());
}

void Sgd::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size()) throw ShapeError("sgd: gradient count mismatch");
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k];
    Tensor& buf = velocity_[k];
    const Tensor& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + opt_.weight_decay * p[i];
      buf[i] = first_ ? gi : opt_.momentum * buf[i] + gi;
      p[i] -= opt_.learning_rate * buf[i];
    }
  }
  first_ = false;
}

}  // namespace ada::nn
