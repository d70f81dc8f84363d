#include "ada/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "ada/errors.hpp"
#include "ada/hash.hpp"

namespace ada {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, const std::string& where) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& v, const std::string& where) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& v, const std::string& where) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(to_int(trim(item), where)));
  if (out.empty()) throw ConfigError(where + ": empty list");
  return out;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

DiversitySpace parse_diversity_space(const std::string& text) {
  if (text == "attention") return DiversitySpace::Attention;
  if (text == "feature") return DiversitySpace::Feature;
  if (text == "pixel") return DiversitySpace::Pixel;
  throw ConfigError("unknown diversity space '" + text + "' (attention, feature, pixel)");
}

std::string to_string(DiversitySpace space) {
  switch (space) {
    case DiversitySpace::Attention: return "attention";
    case DiversitySpace::Feature: return "feature";
    case DiversitySpace::Pixel: return "pixel";
  }
  return "attention";
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(epsilon.epsilon >= 0.0 && epsilon.epsilon <= 1.0, "epsilon must lie in [0,1] pixel units");
  require(lambda_attn >= 0.0, "lambda_attn must be nonnegative");
  require(lambda_div >= 0.0, "lambda_div must be nonnegative");
  require(d_z > 0, "d_z must be positive");
  require(epochs > 0, "epochs must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(weight_decay >= 0.0, "weight_decay must be nonnegative");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must lie in [0,1)");
  require(max_train_samples >= 0, "max_train_samples must be nonnegative");
  require(gen_widths.size() == 3, "gen_widths needs exactly three entries");
  for (int w : gen_widths) require(w > 0, "gen_widths entries must be positive");
  require(cls_epochs > 0, "cls_epochs must be positive");
  require(cls_batch_size > 0, "cls_batch_size must be positive");
  require(cls_learning_rate > 0.0, "cls_learning_rate must be positive");
  require(cls_momentum >= 0.0, "cls_momentum must be nonnegative");
  require(cls_weight_decay >= 0.0, "cls_weight_decay must be nonnegative");
  require(attack_steps > 0, "attack_steps must be positive");
  require(attack_step_size >= 0.0, "attack_step_size must be nonnegative");
  require(attack_momentum >= 0.0, "attack_momentum must be nonnegative");
  require(dim_probability >= 0.0 && dim_probability <= 1.0, "dim_probability must lie in [0,1]");
  require(dim_min_ratio > 0.0 && dim_min_ratio <= 1.0, "dim_min_ratio must lie in (0,1]");
}

std::string RunConfig::canonical_text() const {
  std::string widths;
  for (std::size_t i = 0; i < gen_widths.size(); ++i) {
    widths += (i ? "," : "") + std::to_string(gen_widths[i]);
  }
  std::string out;
  auto line = [&out](const char* key, const std::string& value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  line("seed", std::to_string(seed));
  line("epsilon", fmt_double(epsilon.epsilon));
  line("lambda_attn", fmt_double(lambda_attn));
  line("lambda_div", fmt_double(lambda_div));
  line("d_z", std::to_string(d_z));
  line("channel_norm", channel_norm ? "true" : "false");
  line("diversity_space", to_string(diversity_space));
  line("gen_widths", widths);
  line("gen_skip", gen_skip ? "true" : "false");
  line("epochs", std::to_string(epochs));
  line("learning_rate", fmt_double(learning_rate));
  line("batch_size", std::to_string(batch_size));
  line("beta1", fmt_double(beta1));
  line("beta2", fmt_double(beta2));
  line("weight_decay", fmt_double(weight_decay));
  line("max_train_samples", std::to_string(max_train_samples));
  line("cls_epochs", std::to_string(cls_epochs));
  line("cls_learning_rate", fmt_double(cls_learning_rate));
  line("cls_momentum", fmt_double(cls_momentum));
  line("cls_weight_decay", fmt_double(cls_weight_decay));
  line("cls_batch_size", std::to_string(cls_batch_size));
  line("attack_steps", std::to_string(attack_steps));
  line("attack_step_size", fmt_double(attack_step_size));
  line("attack_momentum", fmt_double(attack_momentum));
  line("dim_probability", fmt_double(dim_probability));
  line("dim_min_ratio", fmt_double(dim_min_ratio));
  line("pgd_random_start", pgd_random_start ? "true" : "false");
  line("feature_layer", feature_layer);
  // Already converted to [0,1]; re-parsing must not scale again.
  line("epsilon_scale", "0-1");
  return out;
}

std::string RunConfig::hash() const { return sha256_hex(canonical_text()).substr(0, 16); }

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  std::map<std::string, std::pair<std::string, int>> entries;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash_pos = raw.find('#');
    const std::string line = trim(hash_pos == std::string::npos ? raw : raw.substr(0, hash_pos));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value', got '{}'", origin, lineno, line));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (entries.count(key)) {
      throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", origin, lineno, key));
    }
    entries[key] = {value, lineno};
  }

  RunConfig cfg;
  double raw_epsilon = 0.0;
  double raw_step = 1.6;
  bool step_given = false;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"seed", [&](auto& v, auto& w) { cfg.seed = static_cast<std::uint64_t>(to_int(v, w)); }},
      {"epsilon", [&](auto& v, auto& w) { raw_epsilon = to_double(v, w); }},
      {"epsilon_scale", [&](auto& v, auto&) { cfg.epsilon_scale = parse_epsilon_scale(v); }},
      {"lambda_attn", [&](auto& v, auto& w) { cfg.lambda_attn = to_double(v, w); }},
      {"lambda_div", [&](auto& v, auto& w) { cfg.lambda_div = to_double(v, w); }},
      {"d_z", [&](auto& v, auto& w) { cfg.d_z = static_cast<int>(to_int(v, w)); }},
      {"channel_norm", [&](auto& v, auto& w) { cfg.channel_norm = to_bool(v, w); }},
      {"diversity_space", [&](auto& v, auto&) { cfg.diversity_space = parse_diversity_space(v); }},
      {"gen_widths", [&](auto& v, auto& w) { cfg.gen_widths = to_int_list(v, w); }},
      {"gen_skip", [&](auto& v, auto& w) { cfg.gen_skip = to_bool(v, w); }},
      {"epochs", [&](auto& v, auto& w) { cfg.epochs = static_cast<int>(to_int(v, w)); }},
      {"learning_rate", [&](auto& v, auto& w) { cfg.learning_rate = to_double(v, w); }},
      {"batch_size", [&](auto& v, auto& w) { cfg.batch_size = static_cast<int>(to_int(v, w)); }},
      {"beta1", [&](auto& v, auto& w) { cfg.beta1 = to_double(v, w); }},
      {"beta2", [&](auto& v, auto& w) { cfg.beta2 = to_double(v, w); }},
      {"weight_decay", [&](auto& v, auto& w) { cfg.weight_decay = to_double(v, w); }},
      {"max_train_samples",
       [&](auto& v, auto& w) { cfg.max_train_samples = static_cast<int>(to_int(v, w)); }},
      {"cls_epochs", [&](auto& v, auto& w) { cfg.cls_epochs = static_cast<int>(to_int(v, w)); }},
      {"cls_learning_rate", [&](auto& v, auto& w) { cfg.cls_learning_rate = to_double(v, w); }},
      {"cls_momentum", [&](auto& v, auto& w) { cfg.cls_momentum = to_double(v, w); }},
      {"cls_weight_decay", [&](auto& v, auto& w) { cfg.cls_weight_decay = to_double(v, w); }},
      {"cls_batch_size",
       [&](auto& v, auto& w) { cfg.cls_batch_size = static_cast<int>(to_int(v, w)); }},
      {"attack_steps", [&](auto& v, auto& w) { cfg.attack_steps = static_cast<int>(to_int(v, w)); }},
      {"attack_step_size",
       [&](auto& v, auto& w) {
         raw_step = to_double(v, w);
         step_given = true;
       }},
      {"attack_momentum", [&](auto& v, auto& w) { cfg.attack_momentum = to_double(v, w); }},
      {"dim_probability", [&](auto& v, auto& w) { cfg.dim_probability = to_double(v, w); }},
      {"dim_min_ratio", [&](auto& v, auto& w) { cfg.dim_min_ratio = to_double(v, w); }},
      {"pgd_random_start", [&](auto& v, auto& w) { cfg.pgd_random_start = to_bool(v, w); }},
      {"feature_layer", [&](auto& v, auto&) { cfg.feature_layer = v; }},
  };

  for (const auto& [key, entry] : entries) {
    const std::string where = fmt::format("{}:{}: key '{}'", origin, entry.second, key);
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError(fmt::format("{}:{}: unknown key '{}'", origin, entry.second, key));
    }
    it->second(entry.first, where);
  }
  for (const char* required : {"seed", "epsilon"}) {
    if (!entries.count(required)) {
      throw ConfigError(fmt::format("{}: missing required key '{}'", origin, required));
    }
  }

  cfg.epsilon = convert_epsilon(raw_epsilon, cfg.epsilon_scale);
  if (step_given) {
    cfg.attack_step_size = convert_epsilon(raw_step, cfg.epsilon_scale).epsilon;
  } else {
    cfg.attack_step_size = 1.6 / 255.0;
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

}  // namespace ada
