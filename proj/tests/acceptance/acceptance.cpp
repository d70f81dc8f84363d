// Acceptance suite: one PASS/FAIL line per criterion on the toy transfer pair.
//
//   ada_acceptance --work DIR [--only 1,7] [--known-fail 8]
//
// Criteria listed in --known-fail still print FAIL but do not change the exit
// status; every other FAIL makes the exit status 1.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ada/attention.hpp"
#include "ada/baselines.hpp"
#include "ada/config.hpp"
#include "ada/dataset.hpp"
#include "ada/evaluation.hpp"
#include "ada/generator.hpp"
#include "ada/model_zoo.hpp"
#include "ada/objectives.hpp"
#include "ada/random.hpp"
#include "ada/trainer.hpp"
#include "unit/support.hpp"

namespace {

using namespace ada;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// The toy suite. The loss weights are scaled down from the full-size defaults:
// with normalized attention maps at 8x8 resolution the attention and diversity
// terms otherwise swamp the classification term and the generator stops being
// adversarial.
constexpr const char* kToySuite = R"(
seed = 1
epsilon = 16
epsilon_scale = 0-255
d_z = 16
gen_widths = 16,32,64
epochs = 10
batch_size = 8
learning_rate = 0.01
lambda_attn = 0.1
lambda_div = 1
cls_epochs = 3
cls_batch_size = 32
cls_learning_rate = 0.01
)";

constexpr int kTrainSamples = 5000;
constexpr int kTestSamples = 1000;
constexpr int kSize = 32;
constexpr std::uint64_t kModelSeed = 7;
constexpr std::array<std::uint64_t, 3> kSeeds{1, 2, 3};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void note(const std::string& text) { fmt::print(stderr, "[acceptance] {}\n", text); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

RunConfig toy_config() { return parse_run_config(kToySuite, "toy suite"); }

struct Data {
  ImageBatch train = make_toy_shapes({kTrainSamples, kSize, 3, 10, 0.06}, 1);
  ImageBatch test = make_toy_shapes({kTestSamples, kSize, 3, 10, 0.06}, 2);
};

struct SeedRun {
  std::shared_ptr<const GeneratorNet> generator;
  double ada_white_box = 0.0;
  double ada_black_box = 0.0;
  double bim_black_box = 0.0;
  std::string csv;
};

// Criterion-7 pipeline: both classifiers, then per seed a generator on CNN-A
// and a transfer report of {bim, ada} over {CNN-A, CNN-B}.
struct Pipeline {
  std::unique_ptr<Classifier> a, b;
  std::vector<SeedRun> seeds;
  double seconds = 0.0;
};

Pipeline run_pipeline(const Data& data, const RunConfig& base, const fs::path& dir) {
  const auto t0 = Clock::now();
  Pipeline p;
  for (ToyArch arch : {ToyArch::CnnA, ToyArch::CnnB}) {
    const std::string id = to_string(arch);
    note(fmt::format("training {}", id));
    ClassifierTrainResult r =
        train_classifier(base, make_toy_model(arch, id, 3, kSize, 10, kModelSeed), data.train);
    r.model.save(dir / (id + ".ckpt"));
    (arch == ToyArch::CnnA ? p.a : p.b) = std::make_unique<Classifier>(std::move(r.model));
  }
  const std::vector<const Classifier*> targets{p.a.get(), p.b.get()};
  for (std::uint64_t seed : kSeeds) {
    RunConfig cfg = base;
    cfg.seed = seed;
    note(fmt::format("training generator, seed {}", seed));
    GeneratorTrainOptions opt;
    opt.out_dir = dir / fmt::format("generator_seed{}", seed);
    auto net = std::make_shared<const GeneratorNet>(train_generator(cfg, *p.a, data.train, opt).net);
    SurrogateAttacks on_a{p.a.get(),
                          {make_baseline("bim", IterativeAttackConfig::from_config(cfg)),
                           make_generator_attack("ada", net, cfg.epsilon)}};
    const TransferReport report =
        transfer_matrix(std::span(&on_a, 1), targets, data.test, {seed, cfg.hash(), 100});
    SeedRun run;
    run.generator = net;
    run.csv = report.to_csv();
    write_file(dir / fmt::format("report_seed{}.csv", seed), run.csv);
    const auto cell = [&](const char* attack, const std::string& target) {
      const TransferRow* row = report.find(p.a->id(), attack, target);
      if (row == nullptr || !row->asr) throw std::runtime_error(fmt::format("no {} cell on {}", attack, target));
      return *row->asr;
    };
    run.ada_white_box = cell("ada", p.a->id());
    run.ada_black_box = cell("ada", p.b->id());
    run.bim_black_box = cell("bim", p.b->id());
    p.seeds.push_back(std::move(run));
  }
  p.seconds = seconds_since(t0);
  return p;
}

double mean_of(const std::vector<SeedRun>& runs, double SeedRun::*field) {
  double s = 0.0;
  for (const SeedRun& r : runs) s += r.*field;
  return s / static_cast<double>(runs.size());
}

std::string per_seed(const std::vector<SeedRun>& runs, double SeedRun::*field) {
  std::string out;
  for (const SeedRun& r : runs) out += fmt::format("{}{:.3f}", out.empty() ? "" : "/", r.*field);
  return out;
}

class Suite {
 public:
  explicit Suite(fs::path work) : work_(std::move(work)), cfg_(toy_config()) {}

  Outcome epsilon_ball() {
    const Pipeline& p = pipeline();
    const auto t0 = Clock::now();
    const double eps = cfg_.epsilon.epsilon;
    std::vector<Attack> attacks;
    for (const std::string& name : baseline_names()) {
      if (name != "identity") attacks.push_back(make_baseline(name, IterativeAttackConfig::from_config(cfg_)));
    }
    attacks.push_back(make_generator_attack("ada", p.seeds.front().generator, cfg_.epsilon));
    double worst = 0.0;
    bool in_range = true;
    for (const Attack& attack : attacks) {
      const ImageBatch adv = run_attack(attack, *p.a, data().test, 11);
      for (std::size_t i = 0; i < adv.pixels.size(); ++i) {
        worst = std::max(worst, std::abs(adv.pixels[i] - data().test.pixels[i]));
        in_range = in_range && adv.pixels[i] >= 0.0 && adv.pixels[i] <= 1.0;
      }
    }
    const double secs = seconds_since(t0);
    return {worst <= eps + 1e-6 && in_range && secs < 120.0,
            fmt::format("max |x_adv - x| = {:.8f} (eps {:.8f}), in [0,1]: {}, {} pairs x {} attacks, {:.1f} s",
                        worst, eps, in_range, data().test.size(), attacks.size(), secs)};
  }

  // Brute force per element: d y_t / dF by central differences through the head,
  // spatial mean, scale, channel L2 normalization.
  Outcome attention_oracle() {
    const auto t0 = Clock::now();
    const Classifier m = make_small_cnn("two-conv", 3, kSize, {8, 16}, 32, 10, 21);
    const ImageBatch batch = make_toy_shapes({10, kSize, 3, 10, 0.06}, 22);
    const AttentionMap fast = attention(m, batch);
    const Tensor f = m.forward_with_features(batch.pixels).features();
    const Shape s = f.shape();
    std::map<std::pair<int, int>, std::vector<double>> channel_cache;
    const auto oracle_channel = [&](int n, int c) -> const std::vector<double>& {
      auto it = channel_cache.find({n, c});
      if (it != channel_cache.end()) return it->second;
      const Tensor one = slice_samples(f, n, n + 1);
      const int t = batch.labels[static_cast<std::size_t>(n)];
      const double h = 1e-6;
      double sum = 0.0;
      for (int i = 0; i < s.h; ++i) {
        for (int j = 0; j < s.w; ++j) {
          Tensor up = one, down = one;
          up.at(0, c, i, j) += h;
          down.at(0, c, i, j) -= h;
          sum += (m.logits_from_features(up).at(0, t, 0, 0) - m.logits_from_features(down).at(0, t, 0, 0)) /
                 (2.0 * h);
        }
      }
      const double w = sum / (s.h * s.w);
      std::vector<double> raw;
      double norm = 0.0;
      for (int i = 0; i < s.h; ++i) {
        for (int j = 0; j < s.w; ++j) {
          raw.push_back(w * f.at(n, c, i, j));
          norm += raw.back() * raw.back();
        }
      }
      for (double& v : raw) v /= std::sqrt(norm) + kChannelNormDelta;
      return channel_cache.emplace(std::pair{n, c}, std::move(raw)).first->second;
    };
    Rng rng(23);
    std::uniform_int_distribution<int> pick_n(0, s.n - 1), pick_c(0, s.c - 1), pick_i(0, s.h - 1),
        pick_j(0, s.w - 1);
    double worst = 0.0;
    int nonzero = 0;
    for (int k = 0; k < 100; ++k) {
      const int n = pick_n(rng), c = pick_c(rng), i = pick_i(rng), j = pick_j(rng);
      const double slow = oracle_channel(n, c)[static_cast<std::size_t>(i * s.w + j)];
      const double quick = fast.values.at(n, c, i, j);
      if (slow != 0.0) ++nonzero;
      worst = std::max(worst, std::abs(quick - slow) / std::max({std::abs(quick), std::abs(slow), 1e-12}));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-2 && secs < 300.0,
            fmt::format("worst rel error {:.2e} over 100 elements ({} nonzero), {:.1f} s", worst, nonzero, secs)};
  }

  Outcome gradient_checks() {
    const auto t0 = Clock::now();
    GeneratorNet net = test::tiny_generator(31);
    const Classifier surrogate = test::tiny_cnn(32);
    const ImageBatch clean = test::random_batch(3, 3, 8, 5, 33);
    Rng rng(34);
    const LatentBatch z1 = sample_latent_batch(rng, 3, 2);
    const LatentBatch z2 = sample_latent_batch(rng, 3, 2);
    const AttentionMap a0 = attention(surrogate, clean);
    const AttackBudget budget{0.3};
    const std::size_t params = net.num_params();
    bool pass = params <= 1000;
    std::string detail = fmt::format("{} generator parameters;", params);
    const std::array<std::pair<const char*, ObjectiveWeights>, 3> terms{{
        {"l_cls", {1, 0, 0, true, DiversitySpace::Attention}},
        {"l_attn", {0, 1, 0, true, DiversitySpace::Attention}},
        {"l_div", {0, 0, 1, true, DiversitySpace::Attention}},
    }};
    for (const auto& [name, w] : terms) {
      const auto eval = [&](bool grads) {
        return generator_objective(net, surrogate, clean, a0, z1, z2, budget, w, nn::Mode::Train, grads);
      };
      const ObjectiveResult r = eval(true);
      double diff = 0.0, norm = 0.0;
      auto ps = net.params();
      const double h = 1e-6;
      for (std::size_t p = 0; p < ps.size(); ++p) {
        Tensor& t = *ps[p];
        for (std::size_t i = 0; i < t.size(); ++i) {
          const double o = t[i];
          t[i] = o + h;
          const double up = eval(false).losses.total;
          t[i] = o - h;
          const double down = eval(false).losses.total;
          t[i] = o;
          const double fd = (up - down) / (2.0 * h);
          diff += std::pow(r.grads[p][i] - fd, 2);
          norm += fd * fd;
        }
      }
      const double rel = norm > 0.0 ? std::sqrt(diff / norm) : INFINITY;
      pass = pass && rel <= 1e-2;
      detail += fmt::format(" {} rel {:.2e};", name, rel);
    }
    const double secs = seconds_since(t0);
    return {pass && secs < 300.0, detail + fmt::format(" {:.1f} s", secs)};
  }

  Outcome reduction_lattice() {
    const Pipeline& p = pipeline();
    const auto t0 = Clock::now();
    const ImageBatch b = take(data().test, 0, 100);
    const IterativeAttackConfig base = IterativeAttackConfig::from_config(cfg_);
    IterativeAttackConfig one = base;
    one.steps = 1;
    one.step_size = base.budget.epsilon;
    const bool bim_fgsm = bim(*p.a, b, one).pixels == fgsm(*p.a, b, base.budget).pixels;
    IterativeAttackConfig fixed = base;
    fixed.random_start = false;
    const bool pgd_bim = pgd(*p.a, b, fixed, {5, 0}).pixels == bim(*p.a, b, base).pixels;
    IterativeAttackConfig mu0 = base;
    mu0.momentum = 0.0;
    const bool mi_bim = mi_fgsm(*p.a, b, mu0).pixels == bim(*p.a, b, mu0).pixels;
    IterativeAttackConfig p0 = base;
    p0.dim_probability = 0.0;
    const bool dim_mi = dim(*p.a, b, p0, {6, 0}).pixels == mi_fgsm(*p.a, b, p0).pixels;
    const double secs = seconds_since(t0);
    return {bim_fgsm && pgd_bim && mi_bim && dim_mi && secs < 60.0,
            fmt::format("bim(T=1)==fgsm {}, pgd(no start)==bim {}, mi(mu=0)==bim {}, dim(p=0)==mi {}, {:.1f} s",
                        bim_fgsm, pgd_bim, mi_bim, dim_mi, secs)};
  }

  // Constant gradient c: g_t = sum_{k<t} mu^k * c / |c|_1 and the iterate moves
  // alpha * sign(c) per step while inside the ball.
  Outcome momentum_trace() {
    const std::vector<double> c{0.37, -1.25, 0.0, 2.5e-4};
    const double l1 = 0.37 + 1.25 + 2.5e-4;
    const AttackBudget budget{16.0 / 255.0};
    const double alpha = 1.6 / 255.0;
    double worst = 0.0;
    for (double mu : {0.0, 0.5, 1.0}) {
      std::vector<double> g(c.size(), 0.0);
      Tensor origin(Shape{1, 1, 1, 4}, {0.5, 0.5, 0.5, 0.5});
      Tensor x = origin;
      for (int t = 1; t <= 2; ++t) {
        accumulate_momentum(g, c, mu);
        x = signed_step(x, Tensor(Shape{1, 1, 1, 4}, g), alpha, origin, budget);
        const double geometric = t == 1 ? 1.0 : 1.0 + mu;
        for (std::size_t i = 0; i < c.size(); ++i) {
          worst = std::max(worst, std::abs(g[i] - geometric * c[i] / l1));
          worst = std::max(worst, std::abs(x[i] - (0.5 + t * alpha * sign(c[i]))));
        }
      }
    }
    return {worst <= 1e-6, fmt::format("max deviation from closed form {:.2e} for mu in {{0, 0.5, 1}}", worst)};
  }

  Outcome diversity_effect() {
    const Pipeline& p = pipeline();
    const auto t0 = Clock::now();
    std::array<double, 2> spread{};
    const std::array<double, 2> lambdas{1000.0, 0.0};
    for (std::size_t k = 0; k < 2; ++k) {
      RunConfig cfg = cfg_;
      cfg.lambda_div = lambdas[k];
      note(fmt::format("training generator, lambda_div {}", lambdas[k]));
      const GeneratorNet net = train_generator(cfg, *p.a, data().train).net;
      spread[k] = latent_attention_spread(net, *p.a, take(data().test, 0, 100), cfg.epsilon, 10, 5);
    }
    const double secs = seconds_since(t0);
    results_["diversity"] = {{"lambda_div_1000", spread[0]}, {"lambda_div_0", spread[1]}};
    return {spread[0] >= 1.2 * spread[1] && secs < 1800.0,
            fmt::format("attention spread {:.4f} (lambda_div 1000) vs {:.4f} (0), ratio {:.2f}, {:.1f} s",
                        spread[0], spread[1], spread[0] / spread[1], secs)};
  }

  Outcome transfer_direction() {
    const Pipeline& p = pipeline();
    const double ada = mean_of(p.seeds, &SeedRun::ada_black_box);
    const double bim = mean_of(p.seeds, &SeedRun::bim_black_box);
    return {ada - bim >= 0.05 && p.seconds < 2700.0,
            fmt::format("black-box ASR on cnn-b: ada {:.3f} ({}) vs bim {:.3f}, margin {:+.1f} pp, {:.1f} s",
                        ada, per_seed(p.seeds, &SeedRun::ada_black_box), bim, 100.0 * (ada - bim), p.seconds)};
  }

  Outcome white_box() {
    const Pipeline& p = pipeline();
    const double wb = mean_of(p.seeds, &SeedRun::ada_white_box);
    return {wb >= 0.70, fmt::format("white-box ASR on cnn-a {:.3f} ({}), floor 0.700", wb,
                                    per_seed(p.seeds, &SeedRun::ada_white_box))};
  }

  Outcome feature_spread_direction() {
    const Pipeline& p = pipeline();
    const std::vector<const Classifier*> models{p.a.get(), p.b.get()};
    const std::vector<Attack> attacks{make_baseline("bim", IterativeAttackConfig::from_config(cfg_)),
                                      make_generator_attack("ada", p.seeds.front().generator, cfg_.epsilon)};
    const SpreadReport r = feature_spread(models, *p.a, take(data().test, 0, 200), attacks, {9, 10});
    const auto dist = [&](const char* attack, const Classifier& m) { return r.find(attack, m.id())->mean_distance; };
    const double ada_b = dist("ada", *p.b), bim_b = dist("bim", *p.b);
    const double ada_a = dist("ada", *p.a), bim_a = dist("bim", *p.a);
    write_file(work_ / "feature_spread.csv", r.to_csv());
    return {ada_b > bim_b, fmt::format("target cnn-b: ada {:.4f} vs bim {:.4f}; surrogate cnn-a: ada {:.4f} vs bim {:.4f}",
                                       ada_b, bim_b, ada_a, bim_a)};
  }

  Outcome channel_norm_ablation() {
    const Pipeline& p = pipeline();
    const auto t0 = Clock::now();
    std::vector<SeedRun> raw;
    for (std::uint64_t seed : kSeeds) {
      RunConfig cfg = cfg_;
      cfg.seed = seed;
      cfg.channel_norm = false;
      note(fmt::format("training generator without channel norm, seed {}", seed));
      auto net = std::make_shared<const GeneratorNet>(train_generator(cfg, *p.a, data().train).net);
      const ImageBatch adv = run_attack(make_generator_attack("ada", net, cfg.epsilon), *p.a, data().test, seed);
      SeedRun r;
      r.ada_black_box = asr(*p.b, adv);
      raw.push_back(r);
    }
    const double with = mean_of(p.seeds, &SeedRun::ada_black_box);
    const double without = mean_of(raw, &SeedRun::ada_black_box);
    return {with >= without - 0.01,
            fmt::format("black-box ASR with channel norm {:.3f} ({}) vs without {:.3f} ({}), {:.1f} s", with,
                        per_seed(p.seeds, &SeedRun::ada_black_box), without, per_seed(raw, &SeedRun::ada_black_box),
                        seconds_since(t0))};
  }

  Outcome evaluation_identities() {
    const Pipeline& p = pipeline();
    const ImageBatch& test = data().test;
    const ImageBatch same = run_attack(make_baseline("identity", {}), *p.a, test, 1);
    bool pass = true;
    std::string detail;
    for (const Classifier* m : {p.a.get(), p.b.get()}) {
      const std::vector<int> pred = predictions(*m, test.pixels);
      int wrong = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != test.labels[i];
      const double clean_error = static_cast<double>(wrong) / static_cast<double>(pred.size());
      const double identity = asr(*m, same);
      pass = pass && identity == clean_error;
      detail += fmt::format("{}: asr(identity) {:.3f} == clean error {:.3f}; ", m->id(), identity, clean_error);
    }
    const Classifier* single[] = {p.b.get()};
    const ImageBatch adv_bim = run_attack(make_baseline("bim", IterativeAttackConfig::from_config(cfg_)), *p.a, test, 1);
    const ImageBatch adv_ada = run_attack(make_generator_attack("ada", p.seeds.front().generator, cfg_.epsilon), *p.a,
                                          test, 1);
    for (const ImageBatch* adv : {&same, &adv_bim, &adv_ada}) {
      pass = pass && ensemble_asr(single, p.a->id(), *adv) == asr(*p.b, *adv);
    }
    return {pass, detail + fmt::format("single-member ensemble equals member on 3 attacks: {}", pass)};
  }

  Outcome determinism() {
    const Pipeline& first = pipeline();
    note("rerunning the transfer pipeline");
    const Pipeline second = run_pipeline(data(), cfg_, work_ / "pipeline_rerun");
    bool equal = first.seeds.size() == second.seeds.size();
    for (std::size_t i = 0; equal && i < first.seeds.size(); ++i) {
      equal = read_file(work_ / "pipeline" / fmt::format("report_seed{}.csv", kSeeds[i])) ==
              read_file(work_ / "pipeline_rerun" / fmt::format("report_seed{}.csv", kSeeds[i]));
    }
    return {equal, fmt::format("{} report CSVs byte-equal across reruns: {}", first.seeds.size(), equal)};
  }

  nlohmann::json& results() { return results_; }

 private:
  const Data& data() {
    if (!data_) {
      note("generating toy datasets");
      data_ = std::make_unique<Data>();
    }
    return *data_;
  }

  const Pipeline& pipeline() {
    if (!pipeline_) {
      pipeline_ = std::make_unique<Pipeline>(run_pipeline(data(), cfg_, work_ / "pipeline"));
      nlohmann::json seeds = nlohmann::json::array();
      for (const SeedRun& r : pipeline_->seeds) {
        seeds.push_back({{"ada_white_box", r.ada_white_box},
                         {"ada_black_box", r.ada_black_box},
                         {"bim_black_box", r.bim_black_box}});
      }
      results_["pipeline"] = {{"seeds", seeds},
                              {"cnn_a_clean_accuracy", accuracy(*pipeline_->a, data().test)},
                              {"cnn_b_clean_accuracy", accuracy(*pipeline_->b, data().test)},
                              {"seconds", pipeline_->seconds}};
    }
    return *pipeline_;
  }

  fs::path work_;
  RunConfig cfg_;
  std::unique_ptr<Data> data_;
  std::unique_ptr<Pipeline> pipeline_;
  nlohmann::json results_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  fs::path work = "acceptance_work";
  std::vector<int> only, known_fail;
  app.add_option("--work", work, "Scratch directory")->capture_default_str();
  app.add_option("--only", only, "Run these criteria only")->delimiter(',');
  app.add_option("--known-fail", known_fail, "Criteria whose FAIL does not change the exit status")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  Suite suite(work);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"epsilon-ball soundness", [&] { return suite.epsilon_ball(); }},
      {"attention finite-difference oracle", [&] { return suite.attention_oracle(); }},
      {"generator loss gradient checks", [&] { return suite.gradient_checks(); }},
      {"baseline reduction lattice", [&] { return suite.reduction_lattice(); }},
      {"momentum two-step closed form", [&] { return suite.momentum_trace(); }},
      {"diversity weight widens latent attention spread", [&] { return suite.diversity_effect(); }},
      {"black-box transfer above bim", [&] { return suite.transfer_direction(); }},
      {"white-box efficacy", [&] { return suite.white_box(); }},
      {"target-side feature spread above bim", [&] { return suite.feature_spread_direction(); }},
      {"channel normalization ablation", [&] { return suite.channel_norm_ablation(); }},
      {"evaluation identities", [&] { return suite.evaluation_identities(); }},
      {"pipeline determinism", [&] { return suite.determinism(); }},
  };
  // Cheap, model-free checks first so that their lines appear early.
  const std::vector<int> order{2, 3, 5, 7, 8, 1, 4, 11, 9, 10, 6, 12};

  std::map<int, std::string> lines;
  bool ok = true;
  for (int id : order) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto& [title, run] = criteria[static_cast<std::size_t>(id - 1)];
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    const bool known = std::find(known_fail.begin(), known_fail.end(), id) != known_fail.end();
    if (!o.pass && !known) ok = false;
    lines[id] = fmt::format("{} {:>2} {}: {}", o.pass ? "PASS" : (known ? "FAIL (known)" : "FAIL"), id, title,
                            o.detail);
    suite.results()["criteria"][std::to_string(id)] = {{"pass", o.pass}, {"detail", o.detail}};
    fmt::print("{}\n", lines[id]);
    std::fflush(stdout);
  }
  std::string summary;
  for (const auto& [id, line] : lines) summary += line + "\n";
  fmt::print("\nsummary\n{}", summary);
  write_file(work / "summary.txt", summary);
  write_file(work / "acceptance.json", suite.results().dump(2) + "\n");
  return ok ? 0 : 1;
}
