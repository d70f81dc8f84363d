#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ada/baselines.hpp"
#include "ada/config.hpp"
#include "ada/model_zoo.hpp"

namespace ada {

/// Top-1 class of every sample.
std::vector<int> predictions(const Classifier& model, const Tensor& pixels);

/// Fraction of samples whose top-1 prediction differs from the label.
double asr(const Classifier& model, const ImageBatch& adv);

/// Misclassification of the mean softmax over `models`, skipping the one whose
/// id equals `surrogate_id`.
double ensemble_asr(std::span<const Classifier* const> models, const std::string& surrogate_id,
                    const ImageBatch& adv);

/// Runs an attack over `data` in chunks; chunking does not change the result.
ImageBatch run_attack(const Attack& attack, const Classifier& surrogate, const ImageBatch& data,
                      std::uint64_t seed, int chunk = 100);

struct TransferRow {
  std::string surrogate;
  std::string attack;
  std::string target;  // a model id or "ensemble"
  bool white_box = false;
  std::optional<double> asr;  // empty when the cell failed
  int n = 0;
  double clean_acc = 0.0;
};

struct TransferGroup {
  std::string surrogate;
  std::string attack;
  std::optional<double> ensemble_asr;
  std::optional<double> mean_black_box_asr;
  int rank = 0;  // 1 = highest ensemble ASR within the surrogate
  std::string error;
};

struct TransferReport {
  std::vector<TransferRow> rows;
  std::vector<TransferGroup> groups;
  std::vector<std::string> errors;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string data_fingerprint;

  const TransferRow* find(const std::string& surrogate, const std::string& attack,
                          const std::string& target) const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Attacks crafted on one surrogate.
struct SurrogateAttacks {
  const Classifier* surrogate = nullptr;
  std::vector<Attack> attacks;
};

struct TransferOptions {
  std::uint64_t seed = 0;
  std::string config_hash;
  int chunk = 100;
};

/// One ASR per (surrogate, attack, target) plus an ensemble row per
/// (surrogate, attack). A failing attack fills its cells with an error.
TransferReport transfer_matrix(std::span<const SurrogateAttacks> surrogates,
                               std::span<const Classifier* const> targets, const ImageBatch& data,
                               const TransferOptions& options);

enum class SweepParameter { Epsilon, LambdaAttn, LambdaDiv };
SweepParameter parse_sweep_parameter(const std::string& text);
std::string to_string(SweepParameter p);

/// Default grid: {4,8,12,16}/255, {0,1,10,100}, or {0,100,1000,10000}.
std::vector<double> default_sweep_values(SweepParameter p);

/// Applies one sweep value to a config (epsilon in [0,1] units).
RunConfig with_sweep_value(RunConfig cfg, SweepParameter p, double value);

struct SweepRow {
  double value = 0.0;
  std::optional<double> ensemble_asr;
  std::optional<double> white_box_asr;
  std::string error;
};

struct SweepReport {
  SweepParameter parameter = SweepParameter::Epsilon;
  std::vector<SweepRow> rows;
  std::string to_csv() const;
};

/// Builds the attack for one swept config (for lambda sweeps this trains a generator).
using AttackFactory = std::function<Attack(const RunConfig& cfg)>;

SweepReport sweep(SweepParameter parameter, std::span<const double> values, const RunConfig& base,
                  const AttackFactory& factory, const Classifier& surrogate,
                  std::span<const Classifier* const> targets, const ImageBatch& data);

/// Top principal axes of row vectors.
struct Pca {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // unit vectors, descending variance
  std::vector<double> variances;
  std::vector<double> project(std::span<const double> row) const;
  std::vector<double> reconstruct(std::span<const double> coords) const;
};

/// Fits `k` components on mean-centred rows of an N x D matrix (row-major).
/// Needs N >= 3. Each component's largest-magnitude entry is positive.
Pca fit_pca(std::span<const double> rows, int n, int d, int k = 2);

struct SpreadEntry {
  std::string attack;
  std::string model;
  double mean_distance = 0.0;
  std::vector<std::array<double, 2>> clean_points;
  std::vector<std::array<double, 2>> adv_points;
};

struct SpreadReport {
  std::vector<SpreadEntry> entries;
  const SpreadEntry* find(const std::string& attack, const std::string& model) const;
  std::string to_csv() const;
};

struct SpreadOptions {
  std::uint64_t seed = 0;
  int latent_codes = 10;  // codes per image for latent attacks
};

/// Mean feature-layer L2 distance between clean and adversarial samples per
/// (attack, model), with a 2-D PCA fitted on the pooled clean + adversarial set.
SpreadReport feature_spread(std::span<const Classifier* const> models, const Classifier& surrogate,
                            const ImageBatch& clean, std::span<const Attack> attacks,
                            const SpreadOptions& options);

/// Mean over images of the mean pairwise attention distance across `codes`
/// latent codes.
double latent_attention_spread(const GeneratorNet& net, const Classifier& surrogate,
                               const ImageBatch& clean, AttackBudget budget, int codes,
                               std::uint64_t seed);

/// Accuracy of each adversarially trained model (rows) under attacks crafted on
/// the clean model (columns).
struct RobustnessTable {
  std::vector<std::string> train_attacks;
  std::vector<std::string> eval_attacks;
  std::vector<std::vector<double>> accuracy;
  std::string to_csv() const;
};

RobustnessTable robustness_table(std::span<const std::string> train_attacks,
                                 std::span<const Classifier* const> trained,
                                 const Classifier& clean_model, std::span<const Attack> eval_attacks,
                                 const ImageBatch& data, std::uint64_t seed);

}  // namespace ada
