#include "ada/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "ada/errors.hpp"
#include "ada/random.hpp"

namespace ada {

void IterativeAttackConfig::validate() const {
  if (!(budget.epsilon >= 0.0 && budget.epsilon <= 1.0)) throw ConfigError("epsilon outside [0,1]");
  if (steps <= 0) throw ConfigError("attack steps must be positive");
  if (!(step_size >= 0.0)) throw ConfigError("attack step size must be nonnegative");
  // Relative slack: 10 * (1.6/255) is 16/255 up to rounding.
  if (step_size * steps < budget.epsilon * (1.0 - 1e-12)) {
    throw ConfigError("step size * steps must reach epsilon");
  }
  if (!(momentum >= 0.0)) throw ConfigError("momentum must be nonnegative");
  if (!(dim_probability >= 0.0 && dim_probability <= 1.0)) {
    throw ConfigError("DIM probability must lie in [0,1]");
  }
  if (!(dim_min_ratio > 0.0 && dim_min_ratio <= 1.0)) throw ConfigError("DIM ratio must lie in (0,1]");
}

IterativeAttackConfig IterativeAttackConfig::from_config(const RunConfig& cfg) {
  IterativeAttackConfig out;
  out.budget = cfg.epsilon;
  out.steps = cfg.attack_steps;
  out.step_size = cfg.attack_step_size;
  out.momentum = cfg.attack_momentum;
  out.dim_probability = cfg.dim_probability;
  out.dim_min_ratio = cfg.dim_min_ratio;
  out.random_start = cfg.pgd_random_start;
  return out;
}

LogitObjective cross_entropy_objective(std::span<const int> labels) {
  std::vector<int> idx(labels.begin(), labels.end());
  return [idx = std::move(idx)](std::span<const double> z, int sample, std::span<double> grad) {
    const int t = idx.at(static_cast<std::size_t>(sample));
    if (t < 0 || t >= static_cast<int>(z.size())) throw ShapeError("label out of range");
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (std::size_t c = 0; c < z.size(); ++c) {
      grad[c] = std::exp(z[c] - lse) - (static_cast<int>(c) == t ? 1.0 : 0.0);
    }
    return lse - z[static_cast<std::size_t>(t)];
  };
}

Tensor loss_gradient(const Classifier& model, const Tensor& pixels, std::span<const int> labels) {
  return model.grad_wrt(pixels, cross_entropy_objective(labels), GradTarget::Input);
}

Tensor signed_step(const Tensor& x, const Tensor& grad, double step, const Tensor& origin,
                   AttackBudget budget) {
  Tensor moved(x.shape());
  for (std::size_t i = 0; i < moved.size(); ++i) moved[i] = x[i] + step * sign(grad[i]);
  return project_to_budget(moved, origin, budget);
}

bool accumulate_momentum(std::span<double> g, std::span<const double> grad, double mu) {
  double l1 = 0.0;
  for (double v : grad) l1 += std::abs(v);
  const bool normalized = l1 > 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = mu * g[i] + (normalized ? grad[i] / l1 : grad[i]);
  }
  return normalized;
}

namespace {

void check(const Classifier& model, const ImageBatch& batch) {
  validate_batch(batch, model.num_classes());
  if (batch.size() == 0) throw ShapeError("attack on an empty batch");
}

ImageBatch with_pixels(const ImageBatch& batch, Tensor pixels) {
  return ImageBatch{std::move(pixels), batch.labels};
}

// BIM iterations from `start`, projected around `origin`.
Tensor iterate(const Classifier& model, const ImageBatch& batch, Tensor x,
               const IterativeAttackConfig& cfg) {
  for (int t = 0; t < cfg.steps; ++t) {
    const Tensor grad = loss_gradient(model, x, batch.labels);
    x = signed_step(x, grad, cfg.step_size, batch.pixels, cfg.budget);
  }
  return x;
}

// Momentum iterations; `transform` draws the per-iteration transforms (or none).
template <typename Transform>
Tensor momentum_iterate(const Classifier& model, const ImageBatch& batch,
                        const IterativeAttackConfig& cfg, AttackStats* stats, Transform&& transform) {
  Tensor x = batch.pixels;
  Tensor g(x.shape());
  for (int t = 0; t < cfg.steps; ++t) {
    const std::vector<DiversityTransform> tf = transform();
    Tensor grad = tf.empty()
                      ? loss_gradient(model, x, batch.labels)
                      : diversity_adjoint(loss_gradient(model, apply_diversity(x, tf), batch.labels), tf);
    for (int n = 0; n < batch.size(); ++n) {
      if (!accumulate_momentum(g.sample(n), grad.sample(n), cfg.momentum) && stats != nullptr) {
        ++stats->zero_gradient_events;
      }
    }
    x = signed_step(x, g, cfg.step_size, batch.pixels, cfg.budget);
  }
  return x;
}

}  // namespace

ImageBatch fgsm(const Classifier& model, const ImageBatch& batch, AttackBudget budget) {
  check(model, batch);
  const Tensor grad = loss_gradient(model, batch.pixels, batch.labels);
  return with_pixels(batch, signed_step(batch.pixels, grad, budget.epsilon, batch.pixels, budget));
}

ImageBatch bim(const Classifier& model, const ImageBatch& batch, const IterativeAttackConfig& cfg) {
  cfg.validate();
  check(model, batch);
  return with_pixels(batch, iterate(model, batch, batch.pixels, cfg));
}

ImageBatch pgd(const Classifier& model, const ImageBatch& batch, const IterativeAttackConfig& cfg,
               const AttackContext& ctx) {
  cfg.validate();
  check(model, batch);
  Tensor start = batch.pixels;
  if (cfg.random_start) {
    const double eps = cfg.budget.epsilon;
    for (int n = 0; n < batch.size(); ++n) {
      Rng rng(derive_seed(ctx.seed, "pgd-start", ctx.first_index + static_cast<std::uint64_t>(n)));
      std::uniform_real_distribution<double> uni(-eps, eps);
      for (double& v : start.sample(n)) v += uni(rng);
    }
    start = project_to_budget(start, batch.pixels, cfg.budget);
  }
  return with_pixels(batch, iterate(model, batch, std::move(start), cfg));
}

ImageBatch mi_fgsm(const Classifier& model, const ImageBatch& batch,
                   const IterativeAttackConfig& cfg, AttackStats* stats) {
  cfg.validate();
  check(model, batch);
  return with_pixels(batch, momentum_iterate(model, batch, cfg, stats,
                                             [] { return std::vector<DiversityTransform>{}; }));
}

ImageBatch dim(const Classifier& model, const ImageBatch& batch, const IterativeAttackConfig& cfg,
               const AttackContext& ctx, AttackStats* stats) {
  cfg.validate();
  check(model, batch);
  const int s = batch.pixels.shape().h;
  if (batch.pixels.shape().w != s) throw ShapeError("DIM needs square images");
  const int r_min = std::min(s - 1, static_cast<int>(std::ceil(cfg.dim_min_ratio * s)));
  std::vector<Rng> rngs;
  for (int n = 0; n < batch.size(); ++n) {
    rngs.emplace_back(derive_seed(ctx.seed, "dim", ctx.first_index + static_cast<std::uint64_t>(n)));
  }
  auto draw = [&] {
    std::vector<DiversityTransform> tf(static_cast<std::size_t>(batch.size()));
    bool any = false;
    for (std::size_t n = 0; n < tf.size(); ++n) {
      // Both draws always happen so streams stay aligned across probabilities.
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rngs[n]);
      const int span = std::max(1, s - r_min);
      const int r = r_min + static_cast<int>(rngs[n]() % static_cast<std::uint64_t>(span));
      tf[n].resized = u < cfg.dim_probability ? r : s;
      any = any || tf[n].resized != s;
    }
    if (!any) tf.clear();
    return tf;
  };
  return with_pixels(batch, momentum_iterate(model, batch, cfg, stats, draw));
}

Tensor apply_diversity(const Tensor& x, std::span<const DiversityTransform> transforms) {
  const Shape sh = x.shape();
  if (static_cast<int>(transforms.size()) != sh.n) throw ShapeError("one transform per sample");
  Tensor out(sh);
  for (int n = 0; n < sh.n; ++n) {
    const int r = transforms[static_cast<std::size_t>(n)].resized;
    if (r <= 0 || r > sh.h || r > sh.w) throw ShapeError("resize side out of range");
    for (int c = 0; c < sh.c; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          out.at(n, c, i, j) = x.at(n, c, i * sh.h / r, j * sh.w / r);
  }
  return out;
}

Tensor diversity_adjoint(const Tensor& grad, std::span<const DiversityTransform> transforms) {
  const Shape sh = grad.shape();
  if (static_cast<int>(transforms.size()) != sh.n) throw ShapeError("one transform per sample");
  Tensor out(sh);
  for (int n = 0; n < sh.n; ++n) {
    const int r = transforms[static_cast<std::size_t>(n)].resized;
    for (int c = 0; c < sh.c; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          out.at(n, c, i * sh.h / r, j * sh.w / r) += grad.at(n, c, i, j);
  }
  return out;
}

std::vector<std::string> baseline_names() {
  return {"identity", "fgsm", "bim", "pgd", "mi-fgsm", "dim"};
}

Attack make_baseline(const std::string& raw_name, const IterativeAttackConfig& cfg,
                     std::shared_ptr<AttackStats> stats) {
  std::string name = raw_name;
  std::replace(name.begin(), name.end(), '_', '-');
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (name == "identity") {
    return {name, [](const Classifier&, const ImageBatch& b, const AttackContext&) { return b; }};
  }
  if (name == "fgsm") {
    return {name, [cfg](const Classifier& m, const ImageBatch& b, const AttackContext&) {
              return fgsm(m, b, cfg.budget);
            }};
  }
  if (name == "bim") {
    return {name, [cfg](const Classifier& m, const ImageBatch& b, const AttackContext&) {
              return bim(m, b, cfg);
            }};
  }
  if (name == "pgd") {
    return {name, [cfg](const Classifier& m, const ImageBatch& b, const AttackContext& ctx) {
              return pgd(m, b, cfg, ctx);
            }};
  }
  if (name == "mi-fgsm") {
    return {name, [cfg, stats](const Classifier& m, const ImageBatch& b, const AttackContext&) {
              return mi_fgsm(m, b, cfg, stats.get());
            }};
  }
  if (name == "dim") {
    return {name, [cfg, stats](const Classifier& m, const ImageBatch& b, const AttackContext& ctx) {
              return dim(m, b, cfg, ctx, stats.get());
            }};
  }
  throw ConfigError("unknown attack '" + raw_name + "'");
}

LatentBatch attack_latents(const AttackContext& ctx, int n, int d_z) {
  LatentBatch z(Shape{n, d_z, 1, 1});
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(ctx.seed, "ada-z", ctx.first_index + static_cast<std::uint64_t>(i)));
    const LatentCode code = sample_latent(rng, d_z);
    std::copy(code.values.begin(), code.values.end(), z.sample(i).begin());
  }
  return z;
}

Attack make_generator_attack(std::string id, std::shared_ptr<const GeneratorNet> net,
                             AttackBudget budget) {
  if (!net) throw ConfigError("generator attack without a generator");
  AttackFn fn = [net, budget](const Classifier&, const ImageBatch& b, const AttackContext& ctx) {
    validate_batch(b);
    return craft(*net, b, attack_latents(ctx, b.size(), net->config().d_z), budget);
  };
  return {std::move(id), std::move(fn), true};
}

}  // namespace ada
