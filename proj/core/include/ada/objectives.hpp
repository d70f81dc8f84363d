#pragma once

#include <array>
#include <vector>

#include "ada/attention.hpp"
#include "ada/config.hpp"
#include "ada/generator.hpp"
#include "ada/model_zoo.hpp"

namespace ada {

/// Default weights of the attention and diversity terms.
inline constexpr double kDefaultLambdaAttn = 10.0;
inline constexpr double kDefaultLambdaDiv = 1000.0;

/// Minimum latent separation for a diversity ratio.
inline constexpr double kMinLatentDistance = 1e-6;

struct LossBreakdown {
  double l_cls = 0.0;
  double l_attn = 0.0;
  double l_div = 0.0;
  double total = 0.0;
  double lambda_attn = kDefaultLambdaAttn;
  double lambda_div = kDefaultLambdaDiv;
};

/// Mean softmax cross-entropy; writes d(mean)/d(logits) when `grad` is given.
double cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad = nullptr);

/// Mean cross-entropy of the surrogate on adversarial images and their true labels.
double cls_loss(const Classifier& model, const ImageBatch& adv);

/// Mean attention distance between adversarial and clean images (class = true label).
double attn_loss(const Classifier& model, const ImageBatch& clean, const ImageBatch& adv,
                 bool channel_norm = true);

/// Mean over samples of |A(adv1) - A(adv2)| / |z1 - z2|, codes per sample.
/// Throws DegeneratePairError if any code pair is closer than kMinLatentDistance.
double div_loss(const Classifier& model, const ImageBatch& adv1, const ImageBatch& adv2,
                const LatentBatch& z1, const LatentBatch& z2, bool channel_norm = true);
double div_loss(const Classifier& model, const ImageBatch& adv1, const ImageBatch& adv2,
                const LatentCode& z1, const LatentCode& z2, bool channel_norm = true);

/// Per-sample |z1 - z2|, validated against kMinLatentDistance.
std::vector<double> latent_distances(const LatentBatch& z1, const LatentBatch& z2);

/// total = l_cls + lambda_attn * l_attn + lambda_div * l_div.
LossBreakdown total_loss(double l_cls, double l_attn, double l_div,
                         double lambda_attn = kDefaultLambdaAttn,
                         double lambda_div = kDefaultLambdaDiv);

/// Term weights and representation choices of the generator objective.
struct ObjectiveWeights {
  double cls = 1.0;
  double attn = kDefaultLambdaAttn;
  double div = kDefaultLambdaDiv;
  bool channel_norm = true;
  DiversitySpace diversity_space = DiversitySpace::Attention;

  static ObjectiveWeights from_config(const RunConfig& cfg);
};

/// Value and parameter gradient of the (to-be-maximized) generator objective
/// for one clean batch and two latent batches.
struct ObjectiveResult {
  LossBreakdown losses;
  nn::Gradients grads;             // d(total)/d(generator params); empty if not requested
  std::array<CraftPass, 2> crafts;  // for running-statistics updates
};

/// The attention of the clean batch is a constant of the objective; callers
/// compute it once per batch with the same channel_norm choice.
ObjectiveResult generator_objective(GeneratorNet& net, const Classifier& surrogate,
                                    const ImageBatch& clean, const AttentionMap& clean_attention,
                                    const LatentBatch& z1, const LatentBatch& z2,
                                    AttackBudget budget, const ObjectiveWeights& weights,
                                    nn::Mode generator_mode, bool want_grads);

}  // namespace ada
