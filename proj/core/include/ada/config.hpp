#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ada/types.hpp"

namespace ada {

/// Which representation the diversity term measures distances in.
enum class DiversitySpace { Attention, Feature, Pixel };

DiversitySpace parse_diversity_space(const std::string& text);
std::string to_string(DiversitySpace space);

/// Every tunable of a run. Budgets and step sizes are already in [0,1] pixel units.
struct RunConfig {
  std::uint64_t seed = 0;
  AttackBudget epsilon{16.0 / 255.0};
  EpsilonScale epsilon_scale = EpsilonScale::Byte255;

  // Generator objective.
  double lambda_attn = 10.0;
  double lambda_div = 1000.0;
  int d_z = 16;
  bool channel_norm = true;
  DiversitySpace diversity_space = DiversitySpace::Attention;
  std::vector<int> gen_widths{64, 128, 256};
  bool gen_skip = false;

  // Generator optimization (Adam).
  int epochs = 100;
  double learning_rate = 1e-4;
  int batch_size = 8;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double weight_decay = 1e-5;
  int max_train_samples = 0;  // 0 = whole dataset

  // Classifier optimization (SGD with momentum).
  int cls_epochs = 30;
  double cls_learning_rate = 1e-3;
  double cls_momentum = 0.9;
  double cls_weight_decay = 5e-4;
  int cls_batch_size = 8;

  // Iterative baselines.
  int attack_steps = 10;
  double attack_step_size = 1.6 / 255.0;
  double attack_momentum = 1.0;
  double dim_probability = 0.5;
  double dim_min_ratio = 0.9;
  bool pgd_random_start = true;

  std::string feature_layer;  // empty = the model's manifest default

  /// Throws ConfigError if any invariant fails.
  void validate() const;

  /// Stable `key = value` rendering; equal configs render identically.
  std::string canonical_text() const;

  /// Short hex digest of canonical_text().
  std::string hash() const;
};

/// Parses flat `key = value` text; `#` starts a comment.
/// `seed` and `epsilon` are required, unknown keys are rejected.
/// `origin` prefixes diagnostics (usually the file path).
RunConfig parse_run_config(const std::string& text, const std::string& origin = "config");

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ada
