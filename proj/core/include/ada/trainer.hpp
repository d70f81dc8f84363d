#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "ada/config.hpp"
#include "ada/generator.hpp"
#include "ada/model_zoo.hpp"
#include "ada/objectives.hpp"

namespace ada {

struct GeneratorLogRow {
  int epoch = 0;
  long step = 0;
  LossBreakdown losses;
};

struct GeneratorTrainOptions {
  /// Checkpoints, loss.csv and manifest.json go here; empty disables persistence.
  std::filesystem::path out_dir;
  /// Called after every optimizer step.
  std::function<void(const GeneratorLogRow&)> on_step;
};

struct GeneratorTrainResult {
  GeneratorNet net;
  std::vector<GeneratorLogRow> log;
  nlohmann::json manifest;
};

GeneratorConfig generator_config_from(const RunConfig& cfg, int image_channels);

/// Optimizer steps per epoch: ceil(samples / batch).
long steps_per_epoch(int samples, int batch_size);

/// Training samples actually used (max_train_samples caps the prefix).
int train_sample_count(const RunConfig& cfg, int available);

/// Maximizes cls + lambda_attn * attn + lambda_div * div against a frozen surrogate.
/// Each step draws a fresh latent pair per sample; deterministic given cfg.seed.
GeneratorTrainResult train_generator(const RunConfig& cfg, const Classifier& surrogate,
                                     const ImageBatch& data,
                                     const GeneratorTrainOptions& options = {});

/// Attack applied to each training batch; receives the model being trained
/// and a per-batch seed.
using BatchAttack =
    std::function<ImageBatch(const Classifier& model, const ImageBatch& batch, std::uint64_t seed)>;

struct ClassifierLogRow {
  int epoch = 0;
  long step = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // on the (possibly adversarial) training batch
};

struct ClassifierTrainOptions {
  std::filesystem::path out_dir;
  std::function<void(const ClassifierLogRow&)> on_step;
};

struct ClassifierTrainResult {
  Classifier model;
  std::vector<ClassifierLogRow> log;
  nlohmann::json manifest;
};

/// SGD with momentum on mean cross-entropy. With an attack each batch is
/// replaced by its adversarial version before the update.
ClassifierTrainResult train_classifier(const RunConfig& cfg, Classifier model,
                                       const ImageBatch& data,
                                       const std::optional<BatchAttack>& attack = std::nullopt,
                                       const ClassifierTrainOptions& options = {});

/// Top-1 accuracy on a batch.
double accuracy(const Classifier& model, const ImageBatch& batch);

}  // namespace ada
