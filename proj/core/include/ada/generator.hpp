#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ada/nn/layers.hpp"
#include "ada/nn/sequential.hpp"
#include "ada/types.hpp"

namespace ada {

struct GeneratorConfig {
  int image_channels = 3;
  int d_z = 16;
  std::array<int, 3> widths{64, 128, 256};
  bool skip_connections = false;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

/// Latent-conditioned encoder-decoder producing perturbations in [-1, 1].
///
/// Encoder: three blocks of (concat tiled z, 4x4 stride-2 conv, batch norm, ReLU).
/// Decoder: three blocks of (4x4 stride-2 transposed conv, batch norm, ReLU),
/// channel plan w2 -> w1 -> w0 -> w0. Head: 1x1 conv to image channels, tanh.
/// With skip_connections, decoder blocks 2 and 3 also see the encoder output at
/// their input resolution.
class GeneratorNet {
 public:
  /// Weights drawn from N(0, 0.02^2) with the given seed.
  GeneratorNet(GeneratorConfig config, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }

  /// Recorded forward pass; inputs to every layer are kept for backward.
  struct Pass {
    nn::Mode mode = nn::Mode::Eval;
    std::array<Tensor, 3> enc_in;    // concat(h_i, tiled z)
    std::array<Tensor, 3> enc_conv;  // conv output
    std::array<Tensor, 3> enc_bn;    // bn output
    std::array<Tensor, 3> enc_out;   // relu output
    std::array<Tensor, 3> dec_in;
    std::array<Tensor, 3> dec_conv;
    std::array<Tensor, 3> dec_bn;
    std::array<Tensor, 3> dec_out;
    Tensor head_pre;
    Tensor perturbation;
  };

  Pass forward(const Tensor& pixels, const LatentBatch& z, nn::Mode mode) const;

  /// Perturbation g(x, z); eval mode uses running batch-norm statistics.
  Tensor generate(const Tensor& pixels, const LatentBatch& z, nn::Mode mode = nn::Mode::Eval) const;
  Tensor generate(const Tensor& pixels, const LatentCode& z, nn::Mode mode = nn::Mode::Eval) const;

  /// Accumulates d/d(params) of a loss whose gradient at the perturbation is `grad`.
  void backward(const Pass& pass, const Tensor& grad_perturbation, nn::Gradients& grads) const;

  void update_running_stats(const Pass& pass);

  std::vector<Tensor*> params();
  std::vector<Tensor*> state();
  nn::Gradients zero_gradients();
  std::size_t num_params();

  /// Head conv layer (tests zero it to get a null perturbation).
  nn::Conv2d& head() { return head_; }

  std::string weights_hash() const;

  /// Stores weights, architecture, latent length, and any run metadata.
  void save(const std::filesystem::path& path, const nlohmann::json& meta = {}) const;
  static GeneratorNet load(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

 private:
  void check_inputs(const Tensor& pixels, const LatentBatch& z) const;
  int dec_in_channels(int block) const;

  GeneratorConfig config_;
  std::vector<nn::Conv2d> enc_conv_;
  std::vector<nn::BatchNorm2d> enc_bn_;
  std::vector<nn::ConvTranspose2d> dec_conv_;
  std::vector<nn::BatchNorm2d> dec_bn_;
  nn::Conv2d head_;
  nn::ReLU relu_;
  nn::Tanh tanh_;
};

/// Tiles each sample's latent code over an h x w grid: N x d_z x h x w.
Tensor tile_latent(const LatentBatch& z, int height, int width);

/// x_adv = Clip(x + eps * g(x, z)) with both the eps-ball and [0,1] enforced.
ImageBatch craft(const GeneratorNet& net, const ImageBatch& batch, const LatentBatch& z,
                 AttackBudget budget);
ImageBatch craft(const GeneratorNet& net, const ImageBatch& batch, const LatentCode& z,
                 AttackBudget budget);

/// Differentiable craft used in training.
struct CraftPass {
  GeneratorNet::Pass gen;
  Tensor candidate;  // x + eps * g before clipping
  ImageBatch adversarial;
};

CraftPass craft_pass(const GeneratorNet& net, const ImageBatch& batch, const LatentBatch& z,
                     AttackBudget budget, nn::Mode mode);

/// d/d(perturbation) from d/d(x_adv): eps where the clip is inactive, 0 where it bites.
Tensor craft_backward(const CraftPass& pass, const Tensor& clean, const Tensor& grad_adv,
                      AttackBudget budget);

}  // namespace ada
