#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ada::tools {

namespace fs = std::filesystem;

/// Flags shared by every subcommand. Flag values override the config file.
struct CommonOptions {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;  // in epsilon_scale units
  std::string epsilon_scale;      // "0-255" or "0-1"; empty keeps the config's
  fs::path out;
  fs::path models = "models";
  int channels = 3;
  int size = 32;
};

struct MakeDataOptions {
  int count = 1000;
  int classes = 10;
  double noise = 0.06;
  std::string format = "dir";  // "dir" or "archive"
};

struct TrainClsOptions {
  fs::path data;
  std::string arch = "cnn-a";
  std::string id;
  int classes = 10;
};

struct TrainGenOptions {
  fs::path data;
  std::string surrogate;
};

struct AttackOptions {
  fs::path data;
  std::string attack;
  std::string surrogate;
};

struct EvalOptions {
  fs::path data;
  std::vector<std::string> attacks;
  std::vector<fs::path> adv;  // attack output directories evaluated from their float sidecars
  std::vector<std::string> surrogates;
  std::vector<std::string> targets;  // empty = every model in the zoo
};

struct SweepOptions {
  fs::path data;
  fs::path train_data;  // generator training set for lambda sweeps
  std::string parameter = "epsilon";
  std::vector<double> values;  // empty = default grid
  std::string attack = "bim";
  std::string surrogate;
  std::vector<std::string> targets;
};

struct AnalyzeOptions {
  fs::path data;
  std::vector<std::string> attacks;
  std::string surrogate;
  std::vector<std::string> targets;
  int codes = 10;
  int count = 0;  // 0 = every image
};

struct AdvTrainOptions {
  fs::path data;
  fs::path test_data;
  std::string arch = "cnn-a";
  std::vector<std::string> train_attacks;
  std::vector<std::string> eval_attacks;
  std::string clean_model;
  int classes = 10;
};

struct ExportAttentionOptions {
  fs::path data;
  std::string surrogate;
  int count = 8;
};

/// Each returns the process exit status: 0 without recorded errors, 1 when
/// any error was recorded, 2 when required artifacts are missing.
int cmd_make_data(const CommonOptions& common, const MakeDataOptions& opt);
int cmd_train_cls(const CommonOptions& common, const TrainClsOptions& opt);
int cmd_train_gen(const CommonOptions& common, const TrainGenOptions& opt);
int cmd_attack(const CommonOptions& common, const AttackOptions& opt);
int cmd_eval(const CommonOptions& common, const EvalOptions& opt);
int cmd_sweep(const CommonOptions& common, const SweepOptions& opt);
int cmd_analyze(const CommonOptions& common, const AnalyzeOptions& opt);
int cmd_adv_train(const CommonOptions& common, const AdvTrainOptions& opt);
int cmd_export_attention(const CommonOptions& common, const ExportAttentionOptions& opt);

}  // namespace ada::tools
