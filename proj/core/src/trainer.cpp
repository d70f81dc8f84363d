#include "ada/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "ada/attention.hpp"
#include "ada/dataset.hpp"
#include "ada/errors.hpp"
#include "ada/hash.hpp"
#include "ada/nn/optim.hpp"
#include "ada/random.hpp"
#include "ada/serialize.hpp"

namespace ada {

namespace {

// Fisher-Yates over [0, n) with raw engine output; identical on every standard library.
std::vector<int> shuffled_order(int n, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

std::vector<int> batch_indices(const std::vector<int>& order, long step_in_epoch, int batch_size) {
  const auto begin = static_cast<std::size_t>(step_in_epoch) * static_cast<std::size_t>(batch_size);
  const auto end = std::min(order.size(), begin + static_cast<std::size_t>(batch_size));
  return {order.begin() + static_cast<std::ptrdiff_t>(begin),
          order.begin() + static_cast<std::ptrdiff_t>(end)};
}

// Redraws any row of z2 that lies within kMinLatentDistance of z1.
void separate_latents(const LatentBatch& z1, LatentBatch& z2, Rng& rng) {
  const int d_z = z1.shape().c;
  for (int n = 0; n < z1.shape().n; ++n) {
    auto a = z1.sample(n);
    while (true) {
      auto b = z2.sample(n);
      double sq = 0.0;
      for (int i = 0; i < d_z; ++i) sq += (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]) *
                                          (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]);
      if (std::sqrt(sq) >= kMinLatentDistance) break;
      const LatentCode fresh = sample_latent(rng, d_z);
      std::copy(fresh.values.begin(), fresh.values.end(), b.begin());
    }
  }
}

std::string g17(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

GeneratorConfig generator_config_from(const RunConfig& cfg, int image_channels) {
  GeneratorConfig g;
  g.image_channels = image_channels;
  g.d_z = cfg.d_z;
  if (cfg.gen_widths.size() != 3) throw ConfigError("gen_widths needs exactly three entries");
  std::copy(cfg.gen_widths.begin(), cfg.gen_widths.end(), g.widths.begin());
  g.skip_connections = cfg.gen_skip;
  return g;
}

long steps_per_epoch(int samples, int batch_size) {
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  return (static_cast<long>(samples) + batch_size - 1) / batch_size;
}

int train_sample_count(const RunConfig& cfg, int available) {
  return cfg.max_train_samples > 0 ? std::min(cfg.max_train_samples, available) : available;
}

GeneratorTrainResult train_generator(const RunConfig& cfg, const Classifier& surrogate,
                                     const ImageBatch& data, const GeneratorTrainOptions& options) {
  cfg.validate();
  if (data.size() == 0) throw ConfigError("train_generator: empty dataset");
  validate_batch(data, surrogate.num_classes());
  const ImageBatch train = take(data, 0, train_sample_count(cfg, data.size()));
  const int n = train.size();

  GeneratorNet net(generator_config_from(cfg, train.pixels.shape().c),
                   derive_seed(cfg.seed, "generator-init"));
  nn::Adam adam(net.params(), {cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});
  const ObjectiveWeights weights = ObjectiveWeights::from_config(cfg);
  const long per_epoch = steps_per_epoch(n, cfg.batch_size);

  nlohmann::json manifest = {
      {"kind", "generator"},
      {"seed", cfg.seed},
      {"config_hash", cfg.hash()},
      {"surrogate", surrogate.id()},
      {"surrogate_weights", surrogate.weights_hash()},
      {"feature_layer", surrogate.feature_layer()},
      {"dataset_fingerprint", dataset_fingerprint(train)},
      {"train_samples", n},
      {"epochs", cfg.epochs},
      {"steps_per_epoch", per_epoch},
      {"generator", net.config().to_json()},
  };

  std::ostringstream csv;
  csv << "step,epoch,l_cls,l_attn,l_div,total\n";
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir / "checkpoints");

  GeneratorTrainResult result{std::move(net), {}, {}};
  GeneratorNet& gen = result.net;
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled_order(n, derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    for (long s = 0; s < per_epoch; ++s, ++step) {
      const auto idx = batch_indices(order, s, cfg.batch_size);
      const ImageBatch batch = gather(train, idx);
      const int b = batch.size();

      Rng rng(derive_seed(cfg.seed, "latent", static_cast<std::uint64_t>(step)));
      const LatentBatch z1 = sample_latent_batch(rng, b, cfg.d_z);
      LatentBatch z2 = sample_latent_batch(rng, b, cfg.d_z);
      separate_latents(z1, z2, rng);

      const AttentionMap clean_attention =
          attention_pass(surrogate, batch.pixels, batch.labels, weights.channel_norm).map;
      ObjectiveResult obj = generator_objective(gen, surrogate, batch, clean_attention, z1, z2,
                                                cfg.epsilon, weights, nn::Mode::Train, true);
      const LossBreakdown& L = obj.losses;
      if (!std::isfinite(L.total) || !std::isfinite(L.l_cls) || !std::isfinite(L.l_attn) ||
          !std::isfinite(L.l_div)) {
        throw NonFiniteLossError(step, "non-finite generator loss at step " + std::to_string(step));
      }
      for (auto& g : obj.grads) g *= -1.0;  // ascent as descent on the negation
      adam.step(obj.grads);
      gen.update_running_stats(obj.crafts[0].gen);
      gen.update_running_stats(obj.crafts[1].gen);

      GeneratorLogRow row{epoch, step, L};
      csv << step << ',' << epoch << ',' << g17(L.l_cls) << ',' << g17(L.l_attn) << ','
          << g17(L.l_div) << ',' << g17(L.total) << '\n';
      if (options.on_step) options.on_step(row);
      result.log.push_back(row);
    }
    if (!options.out_dir.empty()) {
      nlohmann::json meta = manifest;
      meta["epoch"] = epoch;
      gen.save(options.out_dir / "checkpoints" / fmt::format("epoch_{:03d}.ckpt", epoch), meta);
      write_file_atomic(options.out_dir / "loss.csv", csv.str());
    }
  }

  manifest["steps"] = step;
  manifest["weights_hash"] = gen.weights_hash();
  if (!result.log.empty()) {
    const LossBreakdown& last = result.log.back().losses;
    manifest["final_loss"] = {{"l_cls", last.l_cls}, {"l_attn", last.l_attn},
                              {"l_div", last.l_div}, {"total", last.total}};
  }
  if (!options.out_dir.empty()) {
    gen.save(options.out_dir / "generator.ckpt", manifest);
    write_file_atomic(options.out_dir / "loss.csv", csv.str());
    write_file_atomic(options.out_dir / "manifest.json", manifest.dump(2) + "\n");
  }
  result.manifest = std::move(manifest);
  return result;
}

double accuracy(const Classifier& model, const ImageBatch& batch) {
  if (batch.size() == 0) throw ShapeError("accuracy of an empty batch");
  const Tensor logits = model.predict(batch.pixels);
  int correct = 0;
  for (int n = 0; n < batch.size(); ++n) {
    auto z = logits.sample(n);
    const auto top = std::max_element(z.begin(), z.end()) - z.begin();
    if (top == batch.labels[static_cast<std::size_t>(n)]) ++correct;
  }
  return static_cast<double>(correct) / batch.size();
}

ClassifierTrainResult train_classifier(const RunConfig& cfg, Classifier model,
                                       const ImageBatch& data,
                                       const std::optional<BatchAttack>& attack,
                                       const ClassifierTrainOptions& options) {
  cfg.validate();
  if (data.size() == 0) throw ConfigError("train_classifier: empty dataset");
  validate_batch(data, model.num_classes());
  const int n = data.size();
  const long per_epoch = steps_per_epoch(n, cfg.cls_batch_size);
  nn::Sgd sgd(model.network().params(),
              {cfg.cls_learning_rate, cfg.cls_momentum, cfg.cls_weight_decay});

  nlohmann::json manifest = {
      {"kind", "classifier"},
      {"id", model.id()},
      {"seed", cfg.seed},
      {"config_hash", cfg.hash()},
      {"dataset_fingerprint", dataset_fingerprint(data)},
      {"train_samples", n},
      {"epochs", cfg.cls_epochs},
      {"steps_per_epoch", per_epoch},
      {"adversarial", attack.has_value()},
  };
  std::ostringstream csv;
  csv << "step,epoch,loss,accuracy\n";
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  std::vector<ClassifierLogRow> log;
  long step = 0;
  for (int epoch = 1; epoch <= cfg.cls_epochs; ++epoch) {
    const auto order =
        shuffled_order(n, derive_seed(cfg.seed, "cls-shuffle", static_cast<std::uint64_t>(epoch)));
    for (long s = 0; s < per_epoch; ++s, ++step) {
      ImageBatch batch = gather(data, batch_indices(order, s, cfg.cls_batch_size));
      if (attack) {
        batch = (*attack)(model, batch, derive_seed(cfg.seed, "adv-train", static_cast<std::uint64_t>(step)));
      }
      const ForwardPass pass = model.forward_with_features(batch.pixels, nn::Mode::Train);
      Tensor d_logits;
      const double loss = cross_entropy(pass.logits(), batch.labels, &d_logits);
      if (!std::isfinite(loss)) {
        throw NonFiniteLossError(step, "non-finite classifier loss at step " + std::to_string(step));
      }
      nn::Gradients grads = model.network().zero_gradients();
      model.input_backward(pass, d_logits, nn::Mode::Train, &grads);
      sgd.step(grads);
      model.network().update_running_stats(pass.acts);

      int correct = 0;
      for (int i = 0; i < batch.size(); ++i) {
        auto z = pass.logits().sample(i);
        if (std::max_element(z.begin(), z.end()) - z.begin() == batch.labels[static_cast<std::size_t>(i)]) ++correct;
      }
      ClassifierLogRow row{epoch, step, loss, static_cast<double>(correct) / batch.size()};
      csv << step << ',' << epoch << ',' << g17(row.loss) << ',' << g17(row.accuracy) << '\n';
      if (options.on_step) options.on_step(row);
      log.push_back(row);
    }
  }
  manifest["steps"] = step;
  manifest["weights_hash"] = model.weights_hash();
  if (!options.out_dir.empty()) {
    model.save(options.out_dir / (model.id() + ".ckpt"));
    write_file_atomic(options.out_dir / (model.id() + "_loss.csv"), csv.str());
    write_file_atomic(options.out_dir / (model.id() + "_manifest.json"), manifest.dump(2) + "\n");
  }
  return ClassifierTrainResult{std::move(model), std::move(log), std::move(manifest)};
}

}  // namespace ada
