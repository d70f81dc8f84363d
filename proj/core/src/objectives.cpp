#include "ada/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ada/errors.hpp"

namespace ada {

namespace {

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad) {
  const Shape s = logits.shape();
  if (static_cast<int>(labels.size()) != s.n) throw ShapeError("cross_entropy: label count mismatch");
  if (s.n == 0) throw ShapeError("cross_entropy: empty batch");
  const int k = s.c;
  if (grad != nullptr) *grad = Tensor(s);
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const int t = labels[static_cast<std::size_t>(n)];
    if (t < 0 || t >= k) {
      throw ShapeError("label " + std::to_string(t) + " out of range for " + std::to_string(k) +
                       " classes");
    }
    auto z = logits.sample(n);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    total += lse - z[static_cast<std::size_t>(t)];
    if (grad != nullptr) {
      auto g = grad->sample(n);
      for (int c = 0; c < k; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        g[ci] = (std::exp(z[ci] - lse) - (c == t ? 1.0 : 0.0)) / s.n;
      }
    }
  }
  return total / s.n;
}

double cls_loss(const Classifier& model, const ImageBatch& adv) {
  return cross_entropy(model.predict(adv.pixels), adv.labels);
}

double attn_loss(const Classifier& model, const ImageBatch& clean, const ImageBatch& adv,
                 bool channel_norm) {
  if (!(clean.pixels.shape() == adv.pixels.shape()) || clean.labels != adv.labels) {
    throw ShapeError("attn_loss: clean and adversarial batches are not aligned");
  }
  const auto a_clean = attention_pass(model, clean.pixels, clean.labels, channel_norm).map;
  const auto a_adv = attention_pass(model, adv.pixels, clean.labels, channel_norm).map;
  return mean(attention_distance(a_adv, a_clean));
}

std::vector<double> latent_distances(const LatentBatch& z1, const LatentBatch& z2) {
  std::vector<double> d = sample_distance(z1, z2);
  for (std::size_t n = 0; n < d.size(); ++n) {
    if (d[n] < kMinLatentDistance) {
      throw DegeneratePairError("latent codes of sample " + std::to_string(n) +
                                " are closer than 1e-6; resample z2");
    }
  }
  return d;
}

double div_loss(const Classifier& model, const ImageBatch& adv1, const ImageBatch& adv2,
                const LatentBatch& z1, const LatentBatch& z2, bool channel_norm) {
  if (!(adv1.pixels.shape() == adv2.pixels.shape()) || adv1.labels != adv2.labels) {
    throw ShapeError("div_loss: adversarial batches are not aligned");
  }
  const auto zd = latent_distances(z1, z2);
  if (static_cast<int>(zd.size()) != adv1.size()) throw ShapeError("div_loss: one code per sample");
  const auto a1 = attention_pass(model, adv1.pixels, adv1.labels, channel_norm).map;
  const auto a2 = attention_pass(model, adv2.pixels, adv1.labels, channel_norm).map;
  const auto d = attention_distance(a1, a2);
  double sum = 0.0;
  for (std::size_t n = 0; n < d.size(); ++n) sum += d[n] / zd[n];
  return sum / static_cast<double>(d.size());
}

double div_loss(const Classifier& model, const ImageBatch& adv1, const ImageBatch& adv2,
                const LatentCode& z1, const LatentCode& z2, bool channel_norm) {
  return div_loss(model, adv1, adv2, broadcast_latent(z1, adv1.size()),
                  broadcast_latent(z2, adv2.size()), channel_norm);
}

LossBreakdown total_loss(double l_cls, double l_attn, double l_div, double lambda_attn,
                         double lambda_div) {
  if (!(lambda_attn >= 0.0) || !(lambda_div >= 0.0)) {
    throw ConfigError("loss weights must be nonnegative");
  }
  return LossBreakdown{l_cls, l_attn, l_div, l_cls + lambda_attn * l_attn + lambda_div * l_div,
                       lambda_attn, lambda_div};
}

ObjectiveWeights ObjectiveWeights::from_config(const RunConfig& cfg) {
  return ObjectiveWeights{1.0, cfg.lambda_attn, cfg.lambda_div, cfg.channel_norm,
                          cfg.diversity_space};
}

ObjectiveResult generator_objective(GeneratorNet& net, const Classifier& surrogate,
                                    const ImageBatch& clean, const AttentionMap& clean_attention,
                                    const LatentBatch& z1, const LatentBatch& z2,
                                    AttackBudget budget, const ObjectiveWeights& w,
                                    nn::Mode generator_mode, bool want_grads) {
  const int batch = clean.size();
  if (batch == 0) throw ShapeError("generator objective on an empty batch");
  if (clean_attention.normalized != w.channel_norm) {
    throw ShapeError("clean attention normalization does not match the objective");
  }
  const auto zd = latent_distances(z1, z2);

  ObjectiveResult res;
  std::array<AttentionPass, 2> att;
  std::array<Tensor, 2> d_logits;
  std::array<double, 2> ce{};
  std::array<std::vector<double>, 2> dist;
  for (std::size_t k = 0; k < 2; ++k) {
    res.crafts[k] = craft_pass(net, clean, k == 0 ? z1 : z2, budget, generator_mode);
    att[k] = attention_pass(surrogate, res.crafts[k].adversarial.pixels, clean.labels, w.channel_norm);
    ce[k] = cross_entropy(att[k].forward.logits(), clean.labels, &d_logits[k]);
    dist[k] = attention_distance(att[k].map, clean_attention);
  }

  auto diversity_tensor = [&](std::size_t k) -> const Tensor& {
    switch (w.diversity_space) {
      case DiversitySpace::Feature: return att[k].forward.features();
      case DiversitySpace::Pixel: return res.crafts[k].adversarial.pixels;
      case DiversitySpace::Attention: break;
    }
    return att[k].map.values;
  };
  const std::vector<double> d12 = sample_distance(diversity_tensor(0), diversity_tensor(1));

  LossBreakdown& L = res.losses;
  L.l_cls = 0.5 * (ce[0] + ce[1]);
  L.l_attn = 0.5 * (mean(dist[0]) + mean(dist[1]));
  double ratio_sum = 0.0;
  for (int n = 0; n < batch; ++n) ratio_sum += d12[static_cast<std::size_t>(n)] / zd[static_cast<std::size_t>(n)];
  L.l_div = ratio_sum / batch;
  L.lambda_attn = w.attn;
  L.lambda_div = w.div;
  L.total = w.cls * L.l_cls + w.attn * L.l_attn + w.div * L.l_div;
  if (!want_grads) return res;

  res.grads = net.zero_gradients();
  const Tensor& x_div0 = diversity_tensor(0);
  const Tensor& x_div1 = diversity_tensor(1);
  for (std::size_t k = 0; k < 2; ++k) {
    const Tensor& map = att[k].map.values;
    const Tensor& features = att[k].forward.features();
    Tensor d_map(map.shape());
    Tensor d_features(features.shape());
    Tensor d_pixels(clean.pixels.shape());

    if (w.attn != 0.0) {
      for (int n = 0; n < batch; ++n) {
        const double dn = dist[k][static_cast<std::size_t>(n)];
        if (dn <= 0.0) continue;
        const double coef = w.attn * 0.5 / (batch * dn);
        auto a = map.sample(n);
        auto a0 = clean_attention.values.sample(n);
        auto g = d_map.sample(n);
        for (std::size_t i = 0; i < a.size(); ++i) g[i] += coef * (a[i] - a0[i]);
      }
    }
    if (w.div != 0.0) {
      Tensor* target = &d_map;
      if (w.diversity_space == DiversitySpace::Feature) target = &d_features;
      if (w.diversity_space == DiversitySpace::Pixel) target = &d_pixels;
      const double sign = k == 0 ? 1.0 : -1.0;
      for (int n = 0; n < batch; ++n) {
        const auto ni = static_cast<std::size_t>(n);
        if (d12[ni] <= 0.0) continue;
        const double coef = sign * w.div / (batch * d12[ni] * zd[ni]);
        auto a = x_div0.sample(n);
        auto b = x_div1.sample(n);
        auto g = target->sample(n);
        for (std::size_t i = 0; i < a.size(); ++i) g[i] += coef * (a[i] - b[i]);
      }
    }

    d_features += attention_backward(att[k], d_map, w.channel_norm);
    d_logits[k] *= w.cls * 0.5;
    d_features += surrogate.head_backward(att[k].forward, d_logits[k]);
    Tensor d_adv = surrogate.trunk_backward(att[k].forward, d_features);
    d_adv += d_pixels;
    const Tensor d_perturbation = craft_backward(res.crafts[k], clean.pixels, d_adv, budget);
    net.backward(res.crafts[k].gen, d_perturbation, res.grads);
  }
  return res;
}

}  // namespace ada
