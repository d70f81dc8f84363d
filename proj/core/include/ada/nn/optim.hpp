#pragma once

#include <vector>

#include "ada/tensor.hpp"

namespace ada::nn {

/// Adam with L2 weight decay folded into the gradient (the classic coupled form).
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  Adam(std::vector<Tensor*> params, Options options);

  /// Descends along `grads` (aligned with the parameter list).
  void step(const std::vector<Tensor>& grads);
  long steps() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  Options opt_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

/// SGD with heavy-ball momentum and L2 weight decay.
class Sgd {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    double weight_decay = 0.0;
  };

  Sgd(std::vector<Tensor*> params, Options options);
  void step(const std::vector<Tensor>& grads);

 private:
  std::vector<Tensor*> params_;
  Options opt_;
  std::vector<Tensor> velocity_;
  bool first_ = true;
};

}  // namespace ada::nn
