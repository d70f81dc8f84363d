#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "ada/baselines.hpp"
#include "ada/errors.hpp"
#include "ada/random.hpp"
#include "ada/serialize.hpp"
#include "ada/trainer.hpp"
#include "support.hpp"

namespace ada {
namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.d_z = 2;
  cfg.gen_widths = {4, 4, 6};
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.cls_epochs = 2;
  cfg.cls_batch_size = 8;
  cfg.cls_learning_rate = 0.05;
  return cfg;
}

TEST(Trainer, StepsPerEpochIsCeil) {
  EXPECT_EQ(steps_per_epoch(17, 8), 3);
  EXPECT_EQ(steps_per_epoch(16, 8), 2);
  EXPECT_EQ(steps_per_epoch(1, 8), 1);
  EXPECT_THROW(steps_per_epoch(5, 0), ConfigError);
  RunConfig cfg = tiny_config();
  cfg.epochs = 1;
  const Classifier m = test::tiny_cnn(1);
  const auto r = train_generator(cfg, m, test::random_batch(17, 3, 8, 5, 2));
  EXPECT_EQ(r.log.size(), 3u);
  EXPECT_EQ(r.manifest.at("steps"), 3);
}

TEST(Trainer, ReproducibleAndSurrogateUntouched) {
  RunConfig cfg = tiny_config();
  cfg.epochs = 1;
  const Classifier m = test::tiny_cnn(3);
  const std::string before = m.weights_hash();
  const ImageBatch data = test::random_batch(24, 3, 8, 5, 4);
  const auto a = train_generator(cfg, m, data);
  const auto b = train_generator(cfg, m, data);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].losses.total, b.log[i].losses.total);
    EXPECT_EQ(a.log[i].losses.l_div, b.log[i].losses.l_div);
  }
  EXPECT_EQ(a.net.weights_hash(), b.net.weights_hash());
  EXPECT_EQ(m.weights_hash(), before);
  cfg.seed = 8;
  const auto c = train_generator(cfg, m, data);
  EXPECT_NE(c.net.weights_hash(), a.net.weights_hash());
}

TEST(Trainer, PersistsCheckpointsLogAndManifest) {
  const auto dir = test::temp_dir("train_gen");
  const RunConfig cfg = tiny_config();
  const Classifier m = test::tiny_cnn(5);
  GeneratorTrainOptions opt;
  opt.out_dir = dir;
  const auto r = train_generator(cfg, m, test::random_batch(16, 3, 8, 5, 6), opt);
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoints" / "epoch_001.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoints" / "epoch_002.ckpt"));
  nlohmann::json meta;
  const GeneratorNet back = GeneratorNet::load(dir / "generator.ckpt", &meta);
  EXPECT_EQ(back.weights_hash(), r.net.weights_hash());
  EXPECT_EQ(meta.at("config_hash"), cfg.hash());
  EXPECT_EQ(meta.at("seed"), cfg.seed);
  EXPECT_TRUE(meta.contains("dataset_fingerprint"));
  const std::string csv = read_file(dir / "loss.csv");
  EXPECT_EQ(csv.rfind("step,epoch,l_cls,l_attn,l_div,total\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
}

TEST(Trainer, PlainCrossEntropyAttackImprovesWhiteBoxLoss) {
  RunConfig cfg = tiny_config();
  cfg.lambda_attn = 0.0;
  cfg.lambda_div = 0.0;
  cfg.epochs = 6;
  cfg.epsilon = AttackBudget{0.1};
  const Classifier m = test::tiny_cnn(9);
  const ImageBatch data = test::random_batch(32, 3, 8, 5, 10);
  const GeneratorNet init(generator_config_from(cfg, 3), derive_seed(cfg.seed, "generator-init"));
  const auto r = train_generator(cfg, m, data);
  Rng rng(11);
  const LatentBatch z = sample_latent_batch(rng, data.size(), cfg.d_z);
  const double before = cls_loss(m, craft(init, data, z, cfg.epsilon));
  const double after = cls_loss(m, craft(r.net, data, z, cfg.epsilon));
  EXPECT_GT(after, before);
}

TEST(Trainer, ObjectiveTrendsUpward) {
  RunConfig cfg = tiny_config();
  cfg.epochs = 8;
  const Classifier m = test::tiny_cnn(12);
  const auto r = train_generator(cfg, m, test::random_batch(32, 3, 8, 5, 13));
  const std::size_t tenth = std::max<std::size_t>(1, r.log.size() / 10);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < tenth; ++i) {
    first += r.log[i].losses.total;
    last += r.log[r.log.size() - 1 - i].losses.total;
  }
  EXPECT_GT(last, first);
}

TEST(Trainer, RejectsEmptyDataAndNonFiniteLoss) {
  const RunConfig cfg = tiny_config();
  const Classifier m = test::tiny_cnn(14);
  ImageBatch empty;
  empty.pixels = Tensor(Shape{0, 3, 8, 8});
  EXPECT_THROW(train_generator(cfg, m, empty), ConfigError);
  EXPECT_THROW(train_classifier(cfg, m, empty), ConfigError);

  Classifier broken = m;
  auto& logits = dynamic_cast<nn::Linear&>(broken.network().layer(broken.network().find("logits")));
  logits.bias()[0] = std::nan("");
  try {
    train_generator(cfg, broken, test::random_batch(16, 3, 8, 5, 15));
    FAIL();
  } catch (const NonFiniteLossError& e) {
    EXPECT_EQ(e.step(), 0);
  }
}

TEST(TrainClassifier, LearnsSeparableData) {
  RunConfig cfg = tiny_config();
  cfg.cls_epochs = 15;
  ImageBatch data = test::random_batch(60, 3, 8, 3, 16);
  // Class k brightens channel k.
  for (int n = 0; n < data.size(); ++n) {
    const int k = data.labels[static_cast<std::size_t>(n)];
    for (int i = 0; i < 64; ++i) data.pixels.at(n, k, i / 8, i % 8) = std::min(1.0, data.pixels.at(n, k, i / 8, i % 8) + 0.6);
  }
  const Classifier init = make_small_cnn("c", 3, 8, {4, 6}, 8, 3, 17);
  const double before = accuracy(init, data);
  const auto r = train_classifier(cfg, init, data);
  EXPECT_GT(accuracy(r.model, data), std::max(0.9, before));
  EXPECT_EQ(r.log.size(), static_cast<std::size_t>(15 * steps_per_epoch(60, 8)));
}

TEST(TrainClassifier, ZeroBudgetAttackEqualsCleanTraining) {
  const RunConfig cfg = tiny_config();
  const ImageBatch data = test::random_batch(20, 3, 8, 5, 18);
  const Classifier init = test::tiny_cnn(19);
  IterativeAttackConfig ac;
  ac.budget = AttackBudget{0.0};
  const Attack bim_zero = make_baseline("bim", ac);
  const BatchAttack attack = [&](const Classifier& m, const ImageBatch& b, std::uint64_t seed) {
    return bim_zero.run(m, b, AttackContext{seed, 0});
  };
  const auto clean = train_classifier(cfg, init, data);
  const auto adv = train_classifier(cfg, init, data, attack);
  ASSERT_EQ(clean.log.size(), adv.log.size());
  for (std::size_t i = 0; i < clean.log.size(); ++i) EXPECT_EQ(clean.log[i].loss, adv.log[i].loss);
  EXPECT_EQ(clean.model.weights_hash(), adv.model.weights_hash());
}

TEST(TrainClassifier, AttackReplacesBatches) {
  const RunConfig cfg = tiny_config();
  const ImageBatch data = test::random_batch(16, 3, 8, 5, 20);
  const Classifier init = test::tiny_cnn(21);
  int calls = 0;
  const BatchAttack attack = [&](const Classifier&, const ImageBatch& b, std::uint64_t) {
    ++calls;
    ImageBatch out = b;
    out.pixels.fill(0.5);
    return out;
  };
  const auto clean = train_classifier(cfg, init, data);
  const auto adv = train_classifier(cfg, init, data, attack);
  EXPECT_EQ(calls, static_cast<int>(adv.log.size()));
  EXPECT_NE(clean.model.weights_hash(), adv.model.weights_hash());
}

}  // namespace
}  // namespace ada
