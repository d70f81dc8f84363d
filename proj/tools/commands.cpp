#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <memory>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ada/attention.hpp"
#include "ada/baselines.hpp"
#include "ada/config.hpp"
#include "ada/dataset.hpp"
#include "ada/errors.hpp"
#include "ada/evaluation.hpp"
#include "ada/hash.hpp"
#include "ada/random.hpp"
#include "ada/serialize.hpp"
#include "ada/trainer.hpp"
#include "svg.hpp"

namespace ada::tools {
namespace {

using nlohmann::json;

/// Errors recorded while a command keeps going.
class ErrorLog {
 public:
  void add(const std::string& message) {
    fmt::print(stderr, "error: {}\n", message);
    messages_.push_back(message);
  }
  bool any() const { return !messages_.empty(); }
  const std::vector<std::string>& messages() const { return messages_; }
  int status() const { return any() ? 1 : 0; }

 private:
  std::vector<std::string> messages_;
};

/// Collects every missing input before any computation starts.
class Preflight {
 public:
  void path(const fs::path& p, const std::string& what) {
    if (p.empty()) {
      missing_.push_back(what + ": not given");
    } else if (!fs::exists(p)) {
      missing_.push_back(what + ": " + p.string() + " does not exist");
    }
  }
  void model(const ModelZoo& zoo, const std::string& id, const std::string& what) {
    if (id.empty()) {
      missing_.push_back(what + ": not given");
    } else if (!zoo.contains(id)) {
      missing_.push_back(what + ": model '" + id + "' not in " + zoo.dir().string());
    }
  }
  void require(bool ok, const std::string& message) {
    if (!ok) missing_.push_back(message);
  }
  /// Prints the report and returns true when something is missing.
  bool failed() const {
    for (const auto& m : missing_) fmt::print(stderr, "missing: {}\n", m);
    return !missing_.empty();
  }

 private:
  std::vector<std::string> missing_;
};

std::string normalized_name(std::string name) {
  std::replace(name.begin(), name.end(), '_', '-');
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return name;
}

bool is_baseline(const std::string& name) {
  const auto names = baseline_names();
  return std::find(names.begin(), names.end(), normalized_name(name)) != names.end();
}

/// A baseline name, `id=path/to/generator.ckpt`, or a bare checkpoint path.
struct AttackSpec {
  std::string id;
  std::string baseline;
  fs::path generator;
};

AttackSpec parse_attack_spec(const std::string& text) {
  AttackSpec spec;
  if (const auto eq = text.find('='); eq != std::string::npos) {
    spec.id = text.substr(0, eq);
    spec.generator = text.substr(eq + 1);
  } else if (is_baseline(text)) {
    spec.baseline = normalized_name(text);
    spec.id = spec.baseline;
  } else {
    spec.generator = text;
    spec.id = spec.generator.stem().string();
    if (spec.id == "generator" && spec.generator.has_parent_path()) {
      spec.id = spec.generator.parent_path().filename().string();
    }
  }
  return spec;
}

void check_attack(Preflight& pre, const AttackSpec& spec) {
  if (spec.baseline.empty()) pre.path(spec.generator, "generator checkpoint for '" + spec.id + "'");
}

Attack build_attack(const AttackSpec& spec, const RunConfig& cfg) {
  if (!spec.baseline.empty()) {
    return make_baseline(spec.baseline, IterativeAttackConfig::from_config(cfg));
  }
  auto net = std::make_shared<const GeneratorNet>(GeneratorNet::load(spec.generator));
  return make_generator_attack(spec.id, std::move(net), cfg.epsilon);
}

RunConfig resolve_config(const CommonOptions& common) {
  RunConfig cfg = common.config.empty() ? RunConfig{} : load_run_config(common.config);
  if (common.seed) cfg.seed = *common.seed;
  if (!common.epsilon_scale.empty()) cfg.epsilon_scale = parse_epsilon_scale(common.epsilon_scale);
  if (common.epsilon) {
    cfg.epsilon = convert_epsilon(*common.epsilon, cfg.epsilon_scale);
    // Keep the iterative baselines able to reach the new ball.
    cfg.attack_step_size = cfg.epsilon.epsilon / cfg.attack_steps;
  }
  cfg.validate();
  return cfg;
}

DirectoryDataset load_data(const fs::path& path, const CommonOptions& common, ErrorLog& errors) {
  DirectoryDataset d = load_dataset(path, common.channels, common.size);
  for (const auto& f : d.failures) errors.add("skipped " + f);
  if (d.batch.size() == 0) throw IoError("no readable images in " + path.string());
  return d;
}

std::vector<std::string> resolve_targets(const ModelZoo& zoo, const std::vector<std::string>& ids) {
  if (!ids.empty()) return ids;
  std::vector<std::string> all;
  for (const auto& e : zoo.entries()) all.push_back(e.id);
  return all;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path out_dir(const CommonOptions& common) {
  if (common.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(common.out);
  return common.out;
}

std::string loss_summary(const LossBreakdown& l) {
  return fmt::format("l_cls={:.6f} l_attn={:.6f} l_div={:.6f} total={:.6f} (lambda_attn={:g}, lambda_div={:g})",
                     l.l_cls, l.l_attn, l.l_div, l.total, l.lambda_attn, l.lambda_div);
}

/// Replays a saved attack from its float perturbation sidecar.
struct SavedAttack {
  Attack attack;
  std::string surrogate;
};

SavedAttack load_saved_attack(const fs::path& dir, const ImageBatch& clean) {
  const json manifest = json::parse(read_file(dir / "manifest.json"));
  const std::string fingerprint = manifest.at("dataset_fingerprint");
  if (fingerprint != dataset_fingerprint(clean)) {
    throw ConfigError(dir.string() + " was crafted on a different dataset");
  }
  auto delta = std::make_shared<const Tensor>(load_npy(dir / "perturbation.npy"));
  if (delta->shape() != clean.pixels.shape()) throw ShapeError(dir.string() + ": perturbation shape mismatch");
  const AttackBudget budget{manifest.at("epsilon").get<double>()};
  Attack a;
  a.id = manifest.at("attack").get<std::string>();
  a.latent = manifest.value("latent", false);
  a.run = [delta, budget](const Classifier&, const ImageBatch& b, const AttackContext& ctx) {
    ImageBatch out = b;
    const std::size_t per = b.pixels.shape().sample_size();
    const std::size_t offset = static_cast<std::size_t>(ctx.first_index) * per;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] += (*delta)[offset + i];
    out.pixels = project_to_budget(out.pixels, b.pixels, budget);
    return out;
  };
  return {std::move(a), manifest.at("surrogate").get<std::string>()};
}

}  // namespace

int cmd_make_data(const CommonOptions& common, const MakeDataOptions& opt) {
  const fs::path out = out_dir(common);
  ToyShapesOptions o;
  o.num_samples = opt.count;
  o.size = common.size;
  o.channels = common.channels;
  o.num_classes = opt.classes;
  o.noise = opt.noise;
  const ImageBatch data = make_toy_shapes(o, common.seed.value_or(0));
  if (opt.format == "archive") {
    write_image_archive(out / "data.bin", data);
  } else if (opt.format == "dir") {
    save_image_dir(out, data, default_file_names(data.size()));
  } else {
    throw ConfigError("unknown --format '" + opt.format + "' (dir or archive)");
  }
  fmt::print("wrote {} images to {} (fingerprint {})\n", data.size(), out.string(),
             dataset_fingerprint(data));
  return 0;
}

int cmd_train_cls(const CommonOptions& common, const TrainClsOptions& opt) {
  Preflight pre;
  pre.path(opt.data, "--data");
  if (!common.config.empty()) pre.path(common.config, "--config");
  pre.require(!opt.id.empty(), "--id: not given");
  if (pre.failed()) return 2;

  ErrorLog errors;
  const RunConfig cfg = resolve_config(common);
  const DirectoryDataset d = load_data(opt.data, common, errors);
  const Classifier init = make_toy_model(parse_toy_arch(opt.arch), opt.id, common.channels,
                                         common.size, opt.classes, derive_seed(cfg.seed, "cls-init"));
  ClassifierTrainOptions options;
  options.out_dir = common.models / "logs";
  long every = std::max<long>(1, steps_per_epoch(d.batch.size(), cfg.cls_batch_size));
  options.on_step = [every](const ClassifierLogRow& r) {
    if ((r.step + 1) % every == 0) fmt::print(stderr, "epoch {} loss {:.4f}\n", r.epoch, r.loss);
  };
  const ClassifierTrainResult r = train_classifier(cfg, init, d.batch, std::nullopt, options);
  ModelZoo zoo = ModelZoo::open(common.models);
  zoo.add(r.model);
  fmt::print("{} train accuracy {:.4f}\n", opt.id, accuracy(r.model, d.batch));
  return errors.status();
}

int cmd_train_gen(const CommonOptions& common, const TrainGenOptions& opt) {
  Preflight pre;
  pre.path(opt.data, "--data");
  if (!common.config.empty()) pre.path(common.config, "--config");
  pre.path(common.models, "--models");
  const ModelZoo zoo = ModelZoo::open(common.models);
  pre.model(zoo, opt.surrogate, "--surrogate");
  if (pre.failed()) return 2;

  ErrorLog errors;
  const RunConfig cfg = resolve_config(common);
  const fs::path out = out_dir(common);
  const DirectoryDataset d = load_data(opt.data, common, errors);
  const Classifier surrogate = zoo.load(opt.surrogate);
  GeneratorTrainOptions options;
  options.out_dir = out;
  options.on_step = [](const GeneratorLogRow& r) {
    if ((r.step + 1) % 100 == 0) fmt::print(stderr, "step {} {}\n", r.step + 1, loss_summary(r.losses));
  };
  const GeneratorTrainResult r = train_generator(cfg, surrogate, d.batch, options);
  fmt::print("final {}\n", loss_summary(r.log.back().losses));
  fmt::print("checkpoint {}\n", (out / "generator.ckpt").string());
  return errors.status();
}

int cmd_attack(const CommonOptions& common, const AttackOptions& opt) {
  Preflight pre;
  pre.path(opt.data, "--data");
  if (!common.config.empty()) pre.path(common.config, "--config");
  const ModelZoo zoo = ModelZoo::open(common.models);
  pre.model(zoo, opt.surrogate, "--surrogate");
  pre.require(!opt.attack.empty(), "--attack: not given");
  const AttackSpec spec = parse_attack_spec(opt.attack);
  if (!opt.attack.empty()) check_attack(pre, spec);
  if (pre.failed()) return 2;

  ErrorLog errors;
  const RunConfig cfg = resolve_config(common);
  const fs::path out = out_dir(common);
  const DirectoryDataset d = load_data(opt.data, common, errors);
  const Classifier surrogate = zoo.load(opt.surrogate);
  const Attack attack = build_attack(spec, cfg);
  const ImageBatch adv = run_attack(attack, surrogate, d.batch, cfg.seed);

  Tensor delta = adv.pixels;
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= d.batch.pixels[i];
  save_npy(out / "perturbation.npy", delta);
  const fs::path images = out / "images";
  save_image_dir(images, adv, d.files);

  int d_z = 0;
  if (attack.latent) d_z = GeneratorNet::load(spec.generator).config().d_z;
  json per_image = json::array();
  for (int i = 0; i < adv.size(); ++i) {
    const std::string& file = d.files[static_cast<std::size_t>(i)];
    json entry = {{"file", file},
                  {"label", adv.labels[static_cast<std::size_t>(i)]},
                  {"png_sha256", sha256_file(images / file)}};
    if (attack.latent) {
      const LatentBatch z = attack_latents({cfg.seed, static_cast<std::uint64_t>(i)}, 1, d_z);
      entry["z_sha256"] = sha256_hex(z);
    }
    per_image.push_back(std::move(entry));
  }
  const double wb = asr(surrogate, adv);
  const json manifest = {{"attack", attack.id},
                         {"latent", attack.latent},
                         {"surrogate", surrogate.id()},
                         {"epsilon", cfg.epsilon.epsilon},
                         {"seed", cfg.seed},
                         {"config_hash", cfg.hash()},
                         {"dataset_fingerprint", dataset_fingerprint(d.batch)},
                         {"file_list_hash", file_list_hash(d.files)},
                         {"white_box_asr", wb},
                         {"images", per_image},
                         {"errors", errors.messages()}};
  write_json(out / "manifest.json", manifest);
  fmt::print("{} on {}: white-box ASR {:.4f} over {} images\n", attack.id, surrogate.id(), wb, adv.size());
  return errors.status();
}

int cmd_eval(const CommonOptions& common, const EvalOptions& opt) {
  Preflight pre;
  pre.path(opt.data, "--data");
  if (!common.config.empty()) pre.path(common.config, "--config");
  const ModelZoo zoo = ModelZoo::open(common.models);
  const auto target_ids = resolve_targets(zoo, opt.targets);
  pre.require(!target_ids.empty(), "--targets: no models available");
  for (const auto& t : target_ids) pre.model(zoo, t, "--targets");
  pre.require(!opt.attacks.empty() || !opt.adv.empty(), "--attack or --adv: not given");
  if (!opt.attacks.empty()) pre.require(!opt.surrogates.empty(), "--surrogate: not given");
  for (const auto& s : opt.surrogates) pre.model(zoo, s, "--surrogate");
  std::vector<AttackSpec> specs;
  for (const auto& a : opt.attacks) {
    specs.push_back(parse_attack_spec(a));
    check_attack(pre, specs.back());
  }
  for (const auto& dir : opt.adv) {
    pre.path(dir / "manifest.json", "--adv manifest");
    pre.path(dir / "perturbation.npy", "--adv perturbation sidecar");
  }
  if (pre.failed()) return 2;

  ErrorLog errors;
  const RunConfig cfg = resolve_config(common);
  const fs::path out = out_dir(common);
  const DirectoryDataset d = load_data(opt.data, common, errors);

  std::map<std::string, Classifier> models;
  auto model = [&](const std::string& id) -> const Classifier* {
    auto it = models.find(id);
    if (it == models.end()) it = models.emplace(id, zoo.load(id)).first;
    return &it->second;
  };
  std::vector<const Classifier*> targets;
  for (const auto& t : target_ids) targets.push_back(model(t));

  std::vector<SurrogateAttacks> groups;
  auto group_for = [&](const std::string& id) -> SurrogateAttacks& {
    for (auto& g : groups)
      if (g.surrogate->id() == id) return g;
    groups.push_back({model(id), {}});
    return groups.back();
  };
  for (const auto& s : opt.surrogates) {
    auto& g = group_for(s);
    for (const auto& spec : specs) g.attacks.push_back(build_attack(spec, cfg));
  }
  for (const auto& dir : opt.adv) {
    SavedAttack saved = load_saved_attack(dir, d.batch);
    if (!zoo.contains(saved.surrogate)) {
      errors.add(dir.string() + ": surrogate '" + saved.surrogate + "' not in the zoo");
      continue;
    }
    group_for(saved.surrogate).attacks.push_back(std::move(saved.attack));
  }

  TransferReport report = transfer_matrix(groups, targets, d.batch, {cfg.seed, cfg.hash(), 100});
  report.data_fingerprint = dataset_fingerprint(d.batch);
  for (const auto& e : report.errors) errors.add(e);
  json j = report.to_json();
  j["file_list_hash"] = file_list_hash(d.files);
  write_text(out / "report.csv", report.to_csv());
  write_json(out / "report.json", j);

  std::vector<std::string> categories;
  std::vector<Series> series;
  for (const auto& t : target_ids) series.push_back({t, {}});
  series.push_back({"ensemble", {}});
  for (const auto& g : report.groups) {
    categories.push_back(g.surrogate + "/" + g.attack);
    for (auto& s : series) {
      const TransferRow* row = report.find(g.surrogate, g.attack, s.name);
      s.values.push_back(row ? row->asr : std::nullopt);
    }
  }
  write_text(out / "transfer.svg", bar_chart("Attack success rate", categories, series, "ASR"));

  for (const auto& g : report.groups) {
    fmt::print("{:>10} {:>12} rank {} ensemble {}\n", g.surrogate, g.attack, g.rank,
               g.ensemble_asr ? fmt::format("{:.4f}", *g.ensemble_asr) : std::string("failed"));
  }
  return errors.status();
}

int cmd_sweep(const CommonOptions& common, const SweepOptions& opt) {
  Preflight pre;
  pre.path(opt.data, "--data");
  if (!common.config.empty()) pre.path(common.config, "--config");
  const ModelZoo zoo = ModelZoo::open(common.models);
  pre.model(zoo, opt.surrogate, "--surrogate");
  const auto target_ids = resolve_targets(zoo, opt.targets);
  for (const auto& t : target_ids) pre.model(zoo, t, "--targets");
  const SweepParameter parameter = parse_sweep_parameter(opt.parameter);
  const bool train_ada = opt.attack == "ada";
  AttackSpec spec;
  if (train_ada) {
    pre.path(opt.train_data, "--train-data");
  } else {
    spec = parse_attack_spec(opt.attack);
    check_attack(pre, spec);
    pre.require(parameter == SweepParameter::Epsilon,
                "lambda sweeps need --attack ada (a fixed attack ignores the weights)");
  }
  if (pre.failed()) return 2;

  ErrorLog errors;
  const RunConfig base = resolve_config(common);
  const fs::path out = out_dir(common);
  const DirectoryDataset d = load_data(opt.data, common, errors);
  std::optional<DirectoryDataset> train;
  if (train_ada) train = load_data(opt.train_data, common, errors);
  const Classifier surrogate = zoo.load(opt.surrogate);
  std::vector<Classifier> owned;
  owned.reserve(target_ids.size());
  for (const auto& t : target_ids) owned.push_back(zoo.load(t));
  std::vector<const Classifier*> targets;
  for (const auto& m : owned) targets.push_back(&m);

  std::vector<double> values = opt.values;
  if (values.empty()) {
    values = default_sweep_values(parameter);
  } else if (parameter == SweepParameter::Epsilon) {
    for (double& v : values) v = convert_epsilon(v, base.epsilon_scale).epsilon;
  }

  auto swept_value = [parameter](const RunConfig& cfg) {
    switch (parameter) {
      case SweepParameter::Epsilon: return cfg.epsilon.epsilon * 255.0;
      case SweepParameter::LambdaAttn: return cfg.lambda_attn;
      case SweepParameter::LambdaDiv: return cfg.lambda_div;
    }
    return 0.0;
  };
  const AttackFactory factory = [&](const RunConfig& cfg) -> Attack {
    if (!train_ada) return build_attack(spec, cfg);
    GeneratorTrainOptions options;
    options.out_dir = out / fmt::format("{}_{:g}", to_string(parameter), swept_value(cfg));
    const GeneratorTrainResult r = train_generator(cfg, surrogate, train->batch, options);
    return make_generator_attack("ada", std::make_shared<const GeneratorNet>(r.net), cfg.epsilon);
  };
  const SweepReport report = sweep(parameter, values, base, factory, surrogate, targets, d.batch);
  for (const auto& row : report.rows)
    if (!row.error.empty()) errors.add(fmt::format("value {:g}: {}", row.value, row.error));
  write_text(out / "sweep.csv", report.to_csv());

  std::vector<double> xs;
  Series ens{"ensemble ASR", {}}, wb{"white-box ASR", {}};
  for (const auto& row : report.rows) {
    xs.push_back(parameter == SweepParameter::Epsilon ? row.value * 255.0 : row.value);
    ens.values.push_back(row.ensemble_asr);
    wb.values.push_back(row.white_box_asr);
  }
  const std::string x_label = parameter == SweepParameter::Epsilon ? "epsilon (x255)" : to_string(parameter);
  write_text(out / "sweep.svg", line_chart("Sweep of " + to_string(parameter), xs, {ens, wb}, x_label, "ASR"));
  for (const auto& row : report.rows) {
    fmt::print("{} {:g}: ensemble {} white-box {}\n", to_string(parameter), row.value,
               row.ensemble_asr ? fmt::format("{:.4f}", *row.ensemble_asr) : std::string("-"),
               row.white_box_asr ? fmt::format("{:.4f}", *row.white_box_asr) : std::string("-"));
  }
  return errors.status();
}

int cmd_analyze(const CommonOptions& common, const AnalyzeOptions& opt) {
  Preflight pre;
  pre.path(opt.data, "--data");
  if (!common.config.empty()) pre.path(common.config, "--config");
  const ModelZoo zoo = ModelZoo::open(common.models);
  pre.model(zoo, opt.surrogate, "--surrogate");
  const auto target_ids = resolve_targets(zoo, opt.targets);
  for (const auto& t : target_ids) pre.model(zoo, t, "--targets");
  pre.require(!opt.attacks.empty(), "--attack: not given");
  std::vector<AttackSpec> specs;
  for (const auto& a : opt.attacks) {
    specs.push_back(parse_attack_spec(a));
    check_attack(pre, specs.back());
  }
  if (pre.failed()) return 2;

  ErrorLog errors;
  const RunConfig cfg = resolve_config(common);
  const fs::path out = out_dir(common);
  DirectoryDataset d = load_data(opt.data, common, errors);
  if (opt.count > 0 && opt.count < d.batch.size()) d.batch = take(d.batch, 0, opt.count);
  const Classifier surrogate = zoo.load(opt.surrogate);
  std::vector<Classifier> owned;
  for (const auto& t : target_ids) owned.push_back(zoo.load(t));
  std::vector<const Classifier*> models;
  for (const auto& m : owned) models.push_back(&m);

  std::vector<Attack> attacks;
  for (const auto& s : specs) attacks.push_back(build_attack(s, cfg));
  const SpreadReport report = feature_spread(models, surrogate, d.batch, attacks, {cfg.seed, opt.codes});
  write_text(out / "spread.csv", report.to_csv());

  json latent = json::object();
  for (const auto& s : specs) {
    if (s.baseline.empty()) {
      const GeneratorNet net = GeneratorNet::load(s.generator);
      latent[s.id] = latent_attention_spread(net, surrogate, d.batch, cfg.epsilon, opt.codes, cfg.seed);
    }
  }
  json j = {{"seed", cfg.seed}, {"config_hash", cfg.hash()},
            {"dataset_fingerprint", dataset_fingerprint(d.batch)}, {"latent_attention_spread", latent}};
  json entries = json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"attack", e.attack}, {"model", e.model}, {"mean_distance", e.mean_distance}});
    fmt::print("{:>12} on {:>10}: mean feature distance {:.4f}\n", e.attack, e.model, e.mean_distance);
  }
  j["entries"] = entries;
  write_json(out / "spread.json", j);

  for (const Classifier* m : models) {
    std::vector<PointSet> sets;
    for (const auto& e : report.entries) {
      if (e.model != m->id()) continue;
      if (sets.empty()) sets.push_back({"clean", e.clean_points});
      sets.push_back({e.attack, e.adv_points});
    }
    write_text(out / ("pca_" + m->id() + ".svg"), scatter_plot("Features of " + m->id(), sets));
  }
  return errors.status();
}

int cmd_adv_train(const CommonOptions& common, const AdvTrainOptions& opt) {
  Preflight pre;
  pre.path(opt.data, "--data");
  if (!common.config.empty()) pre.path(common.config, "--config");
  pre.require(!opt.train_attacks.empty(), "--train-attack: not given");
  std::vector<AttackSpec> train_specs, eval_specs;
  for (const auto& a : opt.train_attacks) {
    if (a == "none") {
      train_specs.push_back({"none", "", {}});
      continue;
    }
    train_specs.push_back(parse_attack_spec(a));
    check_attack(pre, train_specs.back());
  }
  const ModelZoo zoo = ModelZoo::open(common.models);
  if (!opt.eval_attacks.empty()) {
    pre.path(opt.test_data, "--test-data");
    pre.model(zoo, opt.clean_model, "--clean-model");
    for (const auto& a : opt.eval_attacks) {
      eval_specs.push_back(parse_attack_spec(a));
      check_attack(pre, eval_specs.back());
    }
  }
  if (pre.failed()) return 2;

  ErrorLog errors;
  const RunConfig cfg = resolve_config(common);
  const fs::path out = out_dir(common);
  const DirectoryDataset d = load_data(opt.data, common, errors);
  ModelZoo writable = ModelZoo::open(common.models);
  std::vector<Classifier> trained;
  std::vector<std::string> names;
  for (const auto& spec : train_specs) {
    const std::string id = "adv-" + spec.id;
    const Classifier init = make_toy_model(parse_toy_arch(opt.arch), id, common.channels, common.size,
                                           opt.classes, derive_seed(cfg.seed, "cls-init"));
    std::optional<BatchAttack> batch_attack;
    if (spec.id != "none") {
      auto attack = std::make_shared<const Attack>(build_attack(spec, cfg));
      batch_attack = [attack](const Classifier& m, const ImageBatch& b, std::uint64_t seed) {
        return attack->run(m, b, {seed, 0});
      };
    }
    ClassifierTrainOptions options;
    options.out_dir = out / "logs";
    fmt::print(stderr, "training {}\n", id);
    ClassifierTrainResult r = train_classifier(cfg, init, d.batch, batch_attack, options);
    writable.add(r.model);
    trained.push_back(std::move(r.model));
    names.push_back(spec.id);
  }

  if (!eval_specs.empty()) {
    const DirectoryDataset test = load_data(opt.test_data, common, errors);
    const Classifier clean = writable.load(opt.clean_model);
    std::vector<Attack> evals;
    for (const auto& s : eval_specs) evals.push_back(build_attack(s, cfg));
    std::vector<const Classifier*> ptrs;
    for (const auto& m : trained) ptrs.push_back(&m);
    const RobustnessTable table = robustness_table(names, ptrs, clean, evals, test.batch, cfg.seed);
    write_text(out / "robustness.csv", table.to_csv());
    std::vector<Series> series;
    for (std::size_t r = 0; r < table.train_attacks.size(); ++r) {
      Series s{"trained on " + table.train_attacks[r], {}};
      for (double v : table.accuracy[r]) s.values.push_back(v);
      series.push_back(std::move(s));
    }
    write_text(out / "robustness.svg",
               bar_chart("Accuracy under attacks crafted on " + clean.id(), table.eval_attacks, series, "accuracy"));
    for (std::size_t r = 0; r < table.train_attacks.size(); ++r) {
      std::string line = fmt::format("{:>10}", table.train_attacks[r]);
      for (double v : table.accuracy[r]) line += fmt::format(" {:.4f}", v);
      fmt::print("{}\n", line);
    }
  }
  return errors.status();
}

int cmd_export_attention(const CommonOptions& common, const ExportAttentionOptions& opt) {
  Preflight pre;
  pre.path(opt.data, "--data");
  const ModelZoo zoo = ModelZoo::open(common.models);
  pre.model(zoo, opt.surrogate, "--surrogate");
  if (pre.failed()) return 2;

  ErrorLog errors;
  const fs::path out = out_dir(common);
  const DirectoryDataset d = load_data(opt.data, common, errors);
  const ImageBatch batch = take(d.batch, 0, std::min(opt.count, d.batch.size()));
  const Classifier model = zoo.load(opt.surrogate);
  const AttentionMap map = attention(model, batch);
  save_npy(out / "attention.npy", map.values);
  for (int i = 0; i < batch.size(); ++i) {
    write_png(out / fmt::format("image_{:03d}.png", i), batch.pixels, i);
    write_heatmap_png(out / fmt::format("attention_{:03d}.png", i), attention_heatmap(map, i),
                      std::max(1, common.size / map.values.shape().h));
  }
  fmt::print("wrote {} attention maps to {}\n", batch.size(), out.string());
  return errors.status();
}

}  // namespace ada::tools
