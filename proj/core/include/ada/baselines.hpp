#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ada/config.hpp"
#include "ada/generator.hpp"
#include "ada/model_zoo.hpp"
#include "ada/types.hpp"

namespace ada {

/// Hyperparameters shared by the iterative sign-gradient attacks.
struct IterativeAttackConfig {
  AttackBudget budget{16.0 / 255.0};
  int steps = 10;
  double step_size = 1.6 / 255.0;
  double momentum = 1.0;
  double dim_probability = 0.5;
  double dim_min_ratio = 0.9;  // resize side r drawn from [ratio * s, s)
  bool random_start = true;

  /// Requires steps > 0, step_size * steps >= epsilon, momentum >= 0, probability in [0,1].
  void validate() const;
  static IterativeAttackConfig from_config(const RunConfig& cfg);
};

/// Randomness source of seeded attacks. Sample n of a batch draws from
/// derive_seed(seed, stream, first_index + n), so results do not depend on
/// how a dataset is split into batches.
struct AttackContext {
  std::uint64_t seed = 0;
  std::uint64_t first_index = 0;
};

/// Counters of degenerate events.
struct AttackStats {
  long zero_gradient_events = 0;  // MI/DIM samples whose gradient had zero L1 norm
};

/// Per-sample cross-entropy of the true label as a logit objective.
LogitObjective cross_entropy_objective(std::span<const int> labels);

/// d(sum of per-sample CE)/dx.
Tensor loss_gradient(const Classifier& model, const Tensor& pixels, std::span<const int> labels);

/// -1, 0 or +1.
inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// project_to_budget(x + step * sign(grad), origin).
Tensor signed_step(const Tensor& x, const Tensor& grad, double step, const Tensor& origin,
                   AttackBudget budget);

/// g <- mu * g + grad / |grad|_1 over one sample. A zero-norm gradient is
/// added unnormalized; returns false in that case.
bool accumulate_momentum(std::span<double> g, std::span<const double> grad, double mu);

ImageBatch fgsm(const Classifier& model, const ImageBatch& batch, AttackBudget budget);
ImageBatch bim(const Classifier& model, const ImageBatch& batch, const IterativeAttackConfig& cfg);
ImageBatch pgd(const Classifier& model, const ImageBatch& batch, const IterativeAttackConfig& cfg,
               const AttackContext& ctx);
ImageBatch mi_fgsm(const Classifier& model, const ImageBatch& batch,
                   const IterativeAttackConfig& cfg, AttackStats* stats = nullptr);
ImageBatch dim(const Classifier& model, const ImageBatch& batch, const IterativeAttackConfig& cfg,
               const AttackContext& ctx, AttackStats* stats = nullptr);

/// Input-diversity transform of one sample: nearest-neighbour resize of the
/// s x s image to r x r, placed at the top-left corner of a zero s x s canvas.
/// r == s is the identity.
struct DiversityTransform {
  int resized = 0;  // r
};
Tensor apply_diversity(const Tensor& x, std::span<const DiversityTransform> transforms);
/// Adjoint of apply_diversity: maps a gradient on the transformed copy back to x.
Tensor diversity_adjoint(const Tensor& grad, std::span<const DiversityTransform> transforms);

/// Any attack, addressed by name. `surrogate` is the white-box model.
using AttackFn =
    std::function<ImageBatch(const Classifier& surrogate, const ImageBatch& batch, const AttackContext& ctx)>;

struct Attack {
  std::string id;
  AttackFn run;
  bool latent = false;  // true for generator attacks
};

/// "identity", "fgsm", "bim", "pgd", "mi-fgsm", "dim".
std::vector<std::string> baseline_names();

/// Builds a baseline by name (underscores accepted for dashes).
Attack make_baseline(const std::string& name, const IterativeAttackConfig& cfg,
                     std::shared_ptr<AttackStats> stats = nullptr);

/// Generator attack: one seeded latent code per image, drawn from stream "ada-z".
Attack make_generator_attack(std::string id, std::shared_ptr<const GeneratorNet> net,
                             AttackBudget budget);

/// Latent codes the generator attack uses for samples [first_index, first_index + n).
LatentBatch attack_latents(const AttackContext& ctx, int n, int d_z);

}  // namespace ada
