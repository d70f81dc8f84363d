#include "ada/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "ada/attention.hpp"
#include "ada/errors.hpp"
#include "ada/random.hpp"

namespace ada {

std::vector<int> predictions(const Classifier& model, const Tensor& pixels) {
  const Tensor logits = model.predict(pixels);
  std::vector<int> out(static_cast<std::size_t>(logits.shape().n));
  for (int n = 0; n < logits.shape().n; ++n) {
    auto z = logits.sample(n);
    out[static_cast<std::size_t>(n)] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

double asr(const Classifier& model, const ImageBatch& adv) {
  if (adv.size() == 0) throw ShapeError("asr of an empty batch");
  if (static_cast<int>(adv.labels.size()) != adv.size()) throw ShapeError("asr needs one label per sample");
  const auto pred = predictions(model, adv.pixels);
  int wrong = 0;
  for (std::size_t n = 0; n < pred.size(); ++n) wrong += pred[n] != adv.labels[n] ? 1 : 0;
  return static_cast<double>(wrong) / adv.size();
}

double ensemble_asr(std::span<const Classifier* const> models, const std::string& surrogate_id,
                    const ImageBatch& adv) {
  if (adv.size() == 0) throw ShapeError("ensemble_asr of an empty batch");
  std::vector<const Classifier*> members;
  for (const Classifier* m : models) {
    if (m->id() != surrogate_id) members.push_back(m);
  }
  if (members.empty()) throw ConfigError("ensemble is empty after excluding '" + surrogate_id + "'");
  Tensor mean_prob;
  for (const Classifier* m : members) {
    Tensor logits = m->predict(adv.pixels);
    for (int n = 0; n < logits.shape().n; ++n) {
      auto z = logits.sample(n);
      const double top = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double& v : z) sum += (v = std::exp(v - top));
      for (double& v : z) v /= sum;
    }
    if (mean_prob.empty()) {
      mean_prob = std::move(logits);
    } else {
      mean_prob += logits;
    }
  }
  mean_prob *= 1.0 / static_cast<double>(members.size());
  int wrong = 0;
  for (int n = 0; n < adv.size(); ++n) {
    auto p = mean_prob.sample(n);
    const auto top = std::max_element(p.begin(), p.end()) - p.begin();
    wrong += top != adv.labels[static_cast<std::size_t>(n)] ? 1 : 0;
  }
  return static_cast<double>(wrong) / adv.size();
}

ImageBatch run_attack(const Attack& attack, const Classifier& surrogate, const ImageBatch& data,
                      std::uint64_t seed, int chunk) {
  if (chunk <= 0) throw ConfigError("chunk size must be positive");
  ImageBatch out{Tensor(data.pixels.shape()), data.labels};
  for (int begin = 0; begin < data.size(); begin += chunk) {
    const int end = std::min(data.size(), begin + chunk);
    ImageBatch part{slice_samples(data.pixels, begin, end),
                    {data.labels.begin() + begin, data.labels.begin() + end}};
    const ImageBatch adv = attack.run(surrogate, part, AttackContext{seed, static_cast<std::uint64_t>(begin)});
    if (!(adv.pixels.shape() == part.pixels.shape())) {
      throw ShapeError("attack '" + attack.id + "' changed the batch shape");
    }
    std::copy(adv.pixels.values().begin(), adv.pixels.values().end(),
              out.pixels.sample(begin).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transfer matrix

const TransferRow* TransferReport::find(const std::string& surrogate, const std::string& attack,
                                        const std::string& target) const {
  for (const auto& r : rows) {
    if (r.surrogate == surrogate && r.attack == attack && r.target == target) return &r;
  }
  return nullptr;
}

std::string TransferReport::to_csv() const {
  std::string out = "surrogate,attack,target,white_box,asr,n,clean_acc,seed,config_hash\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{:.6f},{},{}\n", r.surrogate, r.attack, r.target,
                       r.white_box ? "true" : "false",
                       r.asr ? fmt::format("{:.6f}", *r.asr) : std::string(), r.n, r.clean_acc,
                       seed, config_hash);
  }
  return out;
}

nlohmann::json TransferReport::to_json() const {
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& g : groups) {
    nlohmann::json j = {{"surrogate", g.surrogate}, {"attack", g.attack}, {"rank", g.rank}};
    j["ensemble_asr"] = g.ensemble_asr ? nlohmann::json(*g.ensemble_asr) : nlohmann::json();
    j["mean_black_box_asr"] = g.mean_black_box_asr ? nlohmann::json(*g.mean_black_box_asr) : nlohmann::json();
    if (!g.error.empty()) j["error"] = g.error;
    groups_json.push_back(std::move(j));
  }
  return {{"seed", seed},
          {"config_hash", config_hash},
          {"data_fingerprint", data_fingerprint},
          {"rank_by", "ensemble_asr"},
          {"groups", groups_json},
          {"errors", errors}};
}

TransferReport transfer_matrix(std::span<const SurrogateAttacks> surrogates,
                               std::span<const Classifier* const> targets, const ImageBatch& data,
                               const TransferOptions& options) {
  if (data.size() == 0) throw ShapeError("transfer matrix on an empty dataset");
  TransferReport report;
  report.seed = options.seed;
  report.config_hash = options.config_hash;

  std::vector<double> clean_acc;
  for (const Classifier* t : targets) clean_acc.push_back(1.0 - asr(*t, data));

  for (const auto& group : surrogates) {
    const Classifier& surrogate = *group.surrogate;
    std::vector<const Classifier*> others;
    for (const Classifier* t : targets) {
      if (t->id() != surrogate.id()) others.push_back(t);
    }
    const double ensemble_clean =
        others.empty() ? 0.0 : 1.0 - ensemble_asr(targets, surrogate.id(), data);
    const std::size_t first_group = report.groups.size();

    for (const Attack& attack : group.attacks) {
      TransferGroup g{surrogate.id(), attack.id, std::nullopt, std::nullopt, 0, {}};
      std::optional<ImageBatch> adv;
      try {
        adv = run_attack(attack, surrogate, data, options.seed, options.chunk);
      } catch (const std::exception& e) {
        g.error = e.what();
        report.errors.push_back(surrogate.id() + "/" + attack.id + ": " + e.what());
      }
      double black_sum = 0.0;
      int black_count = 0;
      for (std::size_t t = 0; t < targets.size(); ++t) {
        TransferRow row{surrogate.id(), attack.id, targets[t]->id(),
                        targets[t]->id() == surrogate.id(), std::nullopt, data.size(), clean_acc[t]};
        if (adv) {
          row.asr = asr(*targets[t], *adv);
          if (!row.white_box) {
            black_sum += *row.asr;
            ++black_count;
          }
        }
        report.rows.push_back(row);
      }
      if (!others.empty()) {
        TransferRow row{surrogate.id(), attack.id, "ensemble", false, std::nullopt, data.size(),
                        ensemble_clean};
        if (adv) {
          row.asr = ensemble_asr(targets, surrogate.id(), *adv);
          g.ensemble_asr = row.asr;
        }
        report.rows.push_back(row);
      }
      if (black_count > 0) g.mean_black_box_asr = black_sum / black_count;
      report.groups.push_back(std::move(g));
    }

    // Rank within the surrogate: ensemble ASR, then mean black-box ASR; failed cells last.
    std::vector<std::size_t> order(report.groups.size() - first_group);
    std::iota(order.begin(), order.end(), first_group);
    auto key = [&](std::size_t i) {
      const auto& g = report.groups[i];
      return std::pair{g.ensemble_asr.value_or(-1.0), g.mean_black_box_asr.value_or(-1.0)};
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
    for (std::size_t r = 0; r < order.size(); ++r) report.groups[order[r]].rank = static_cast<int>(r) + 1;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps

SweepParameter parse_sweep_parameter(const std::string& text) {
  if (text == "epsilon") return SweepParameter::Epsilon;
  if (text == "lambda_attn" || text == "lambda-attn") return SweepParameter::LambdaAttn;
  if (text == "lambda_div" || text == "lambda-div") return SweepParameter::LambdaDiv;
  throw ConfigError("unknown sweep parameter '" + text + "' (epsilon, lambda_attn, lambda_div)");
}

std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::Epsilon: return "epsilon";
    case SweepParameter::LambdaAttn: return "lambda_attn";
    case SweepParameter::LambdaDiv: return "lambda_div";
  }
  return "epsilon";
}

std::vector<double> default_sweep_values(SweepParameter p) {
  switch (p) {
    case SweepParameter::Epsilon: return {4.0 / 255.0, 8.0 / 255.0, 12.0 / 255.0, 16.0 / 255.0};
    case SweepParameter::LambdaAttn: return {0.0, 1.0, 10.0, 100.0};
    case SweepParameter::LambdaDiv: return {0.0, 100.0, 1000.0, 10000.0};
  }
  return {};
}

RunConfig with_sweep_value(RunConfig cfg, SweepParameter p, double value) {
  switch (p) {
    case SweepParameter::Epsilon:
      cfg.epsilon = AttackBudget{value};
      // Keep the iterative baselines able to reach the ball.
      cfg.attack_step_size = value / cfg.attack_steps;
      break;
    case SweepParameter::LambdaAttn: cfg.lambda_attn = value; break;
    case SweepParameter::LambdaDiv: cfg.lambda_div = value; break;
  }
  cfg.validate();
  return cfg;
}

std::string SweepReport::to_csv() const {
  std::string out = "parameter,value,ensemble_asr,white_box_asr,error\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.10g},{},{},{}\n", to_string(parameter), r.value,
                       r.ensemble_asr ? fmt::format("{:.6f}", *r.ensemble_asr) : std::string(),
                       r.white_box_asr ? fmt::format("{:.6f}", *r.white_box_asr) : std::string(),
                       r.error);
  }
  return out;
}

SweepReport sweep(SweepParameter parameter, std::span<const double> values, const RunConfig& base,
                  const AttackFactory& factory, const Classifier& surrogate,
                  std::span<const Classifier* const> targets, const ImageBatch& data) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  SweepReport report;
  report.parameter = parameter;
  for (double v : values) {
    SweepRow row;
    row.value = v;
    try {
      const RunConfig cfg = with_sweep_value(base, parameter, v);
      const Attack attack = factory(cfg);
      const ImageBatch adv = run_attack(attack, surrogate, data, cfg.seed);
      row.white_box_asr = asr(surrogate, adv);
      row.ensemble_asr = ensemble_asr(targets, surrogate.id(), adv);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------
// PCA and feature spread

std::vector<double> Pca::project(std::span<const double> row) const {
  std::vector<double> out(components.size(), 0.0);
  for (std::size_t k = 0; k < components.size(); ++k) {
    for (std::size_t i = 0; i < row.size(); ++i) out[k] += (row[i] - mean[i]) * components[k][i];
  }
  return out;
}

std::vector<double> Pca::reconstruct(std::span<const double> coords) const {
  std::vector<double> out = mean;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coords[k] * components[k][i];
  }
  return out;
}

Pca fit_pca(std::span<const double> rows, int n, int d, int k) {
  if (n < 3) throw ShapeError("PCA needs at least 3 samples");
  if (d < 1 || k < 1 || rows.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(d)) {
    throw ShapeError("PCA input is not an n x d matrix");
  }
  using Mat = Eigen::MatrixXd;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(rows.data(), n, d);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Mat xc = x.rowwise() - mu;
  const int kk = std::min({k, n, d});

  Mat basis(d, kk);
  Eigen::VectorXd var(kk);
  if (n <= d) {
    const Mat gram = xc * xc.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    for (int j = 0; j < kk; ++j) {
      const int col = n - 1 - j;  // eigenvalues ascend
      Eigen::VectorXd v = xc.transpose() * es.eigenvectors().col(col);
      const double norm = v.norm();
      if (norm > 0.0) v /= norm;
      basis.col(j) = v;
      var(j) = std::max(0.0, es.eigenvalues()(col)) / (n - 1);
    }
  } else {
    const Mat cov = xc.transpose() * xc / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    for (int j = 0; j < kk; ++j) {
      const int col = d - 1 - j;
      basis.col(j) = es.eigenvectors().col(col);
      var(j) = std::max(0.0, es.eigenvalues()(col));
    }
  }

  Pca pca;
  pca.mean.assign(mu.data(), mu.data() + d);
  for (int j = 0; j < kk; ++j) {
    Eigen::Index arg = 0;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, j) < 0.0) basis.col(j) *= -1.0;
    pca.components.emplace_back(basis.col(j).data(), basis.col(j).data() + d);
    pca.variances.push_back(var(j));
  }
  return pca;
}

const SpreadEntry* SpreadReport::find(const std::string& attack, const std::string& model) const {
  for (const auto& e : entries) {
    if (e.attack == attack && e.model == model) return &e;
  }
  return nullptr;
}

std::string SpreadReport::to_csv() const {
  std::string out = "attack,model,mean_distance,points\n";
  for (const auto& e : entries) {
    out += fmt::format("{},{},{:.6f},{}\n", e.attack, e.model, e.mean_distance, e.adv_points.size());
  }
  return out;
}

SpreadReport feature_spread(std::span<const Classifier* const> models, const Classifier& surrogate,
                            const ImageBatch& clean, std::span<const Attack> attacks,
                            const SpreadOptions& options) {
  if (clean.size() < 3) throw ShapeError("feature spread needs at least 3 samples");
  SpreadReport report;
  for (const Attack& attack : attacks) {
    std::vector<ImageBatch> advs;
    const int runs = attack.latent ? std::max(1, options.latent_codes) : 1;
    for (int j = 0; j < runs; ++j) {
      const std::uint64_t seed =
          attack.latent ? derive_seed(options.seed, "spread-code", static_cast<std::uint64_t>(j)) : options.seed;
      advs.push_back(run_attack(attack, surrogate, clean, seed));
    }
    for (const Classifier* model : models) {
      const Tensor f_clean = model->forward_with_features(clean.pixels).features();
      const int n = clean.size();
      const auto d = static_cast<int>(f_clean.shape().sample_size());
      std::vector<double> pooled(f_clean.values().begin(), f_clean.values().end());
      double dist_sum = 0.0;
      for (const auto& adv : advs) {
        const Tensor f_adv = model->forward_with_features(adv.pixels).features();
        for (double v : sample_distance(f_adv, f_clean)) dist_sum += v;
        pooled.insert(pooled.end(), f_adv.values().begin(), f_adv.values().end());
      }
      SpreadEntry entry;
      entry.attack = attack.id;
      entry.model = model->id();
      entry.mean_distance = dist_sum / (static_cast<double>(n) * static_cast<double>(advs.size()));
      const int total = n * (1 + static_cast<int>(advs.size()));
      const Pca pca = fit_pca(pooled, total, d, 2);
      for (int i = 0; i < total; ++i) {
        auto p = pca.project(std::span<const double>(pooled).subspan(static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)));
        std::array<double, 2> xy{p.empty() ? 0.0 : p[0], p.size() > 1 ? p[1] : 0.0};
        (i < n ? entry.clean_points : entry.adv_points).push_back(xy);
      }
      report.entries.push_back(std::move(entry));
    }
  }
  return report;
}

double latent_attention_spread(const GeneratorNet& net, const Classifier& surrogate,
                               const ImageBatch& clean, AttackBudget budget, int codes,
                               std::uint64_t seed) {
  if (codes < 2) throw ConfigError("latent spread needs at least two codes");
  if (clean.size() == 0) throw ShapeError("latent spread on an empty batch");
  std::vector<AttentionMap> maps;
  for (int j = 0; j < codes; ++j) {
    const AttackContext ctx{derive_seed(seed, "spread-code", static_cast<std::uint64_t>(j)), 0};
    const ImageBatch adv = craft(net, clean, attack_latents(ctx, clean.size(), net.config().d_z), budget);
    maps.push_back(attention(surrogate, adv));
  }
  std::vector<double> per_image(static_cast<std::size_t>(clean.size()), 0.0);
  int pairs = 0;
  for (int a = 0; a < codes; ++a) {
    for (int b = a + 1; b < codes; ++b, ++pairs) {
      const auto d = attention_distance(maps[static_cast<std::size_t>(a)], maps[static_cast<std::size_t>(b)]);
      for (std::size_t i = 0; i < d.size(); ++i) per_image[i] += d[i];
    }
  }
  double total = 0.0;
  for (double v : per_image) total += v / pairs;
  return total / clean.size();
}

std::string RobustnessTable::to_csv() const {
  std::string out = "train_attack";
  for (const auto& e : eval_attacks) out += "," + e;
  out += "\n";
  for (std::size_t r = 0; r < train_attacks.size(); ++r) {
    out += train_attacks[r];
    for (double v : accuracy[r]) out += fmt::format(",{:.6f}", v);
    out += "\n";
  }
  return out;
}

RobustnessTable robustness_table(std::span<const std::string> train_attacks,
                                 std::span<const Classifier* const> trained,
                                 const Classifier& clean_model, std::span<const Attack> eval_attacks,
                                 const ImageBatch& data, std::uint64_t seed) {
  if (train_attacks.size() != trained.size()) throw ConfigError("one name per trained model");
  RobustnessTable table;
  table.train_attacks.assign(train_attacks.begin(), train_attacks.end());
  table.accuracy.assign(trained.size(), {});
  for (const Attack& attack : eval_attacks) {
    table.eval_attacks.push_back(attack.id);
    const ImageBatch adv = run_attack(attack, clean_model, data, seed);
    for (std::size_t r = 0; r < trained.size(); ++r) {
      table.accuracy[r].push_back(1.0 - asr(*trained[r], adv));
    }
  }
  return table;
}

}  // namespace ada
