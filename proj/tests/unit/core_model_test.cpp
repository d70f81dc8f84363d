#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ada/config.hpp"
#include "ada/errors.hpp"
#include "ada/random.hpp"
#include "ada/tensor.hpp"
#include "ada/types.hpp"
#include "support.hpp"

namespace ada {
namespace {

TEST(Tensor, SliceGatherConcatSplit) {
  Tensor t(Shape{3, 2, 1, 2}, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  const Tensor mid = slice_samples(t, 1, 2);
  EXPECT_EQ(mid.shape(), (Shape{1, 2, 1, 2}));
  EXPECT_EQ(mid[0], 4.0);
  const std::vector<int> idx{2, 0};
  const Tensor g = gather_samples(t, idx);
  EXPECT_EQ(g[0], 8.0);
  EXPECT_EQ(g[4], 0.0);

  Tensor b(Shape{3, 1, 1, 2}, 7.0);
  const Tensor joined = concat_channels(t, b);
  EXPECT_EQ(joined.shape().c, 3);
  Tensor first, rest;
  split_channels(joined, 2, first, rest);
  EXPECT_EQ(first, t);
  EXPECT_EQ(rest, b);
}

TEST(Tensor, ShapeMismatchThrows) {
  Tensor a(Shape{1, 1, 2, 2});
  Tensor b(Shape{1, 1, 2, 3});
  EXPECT_THROW(a += b, ShapeError);
  EXPECT_THROW(max_abs_diff(a, b), ShapeError);
}

TEST(ValidateBatch, NamesOffendingSample) {
  ImageBatch b = test::random_batch(4, 3, 4, 5, 1);
  b.pixels.at(2, 1, 0, 0) = 1.5;
  try {
    validate_batch(b);
    FAIL() << "expected a range error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.kind(), ValidationError::Kind::Range);
    EXPECT_EQ(e.sample_index(), 2);
  }
}

TEST(ValidateBatch, NonFiniteAndLabels) {
  ImageBatch b = test::random_batch(3, 1, 4, 5, 2);
  b.pixels.at(1, 0, 1, 1) = std::nan("");
  try {
    validate_batch(b);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.kind(), ValidationError::Kind::NonFinite);
    EXPECT_EQ(e.sample_index(), 1);
  }
  ImageBatch c = test::random_batch(3, 3, 4, 5, 3);
  c.labels.pop_back();
  EXPECT_THROW(validate_batch(c), ValidationError);
  ImageBatch d = test::random_batch(3, 3, 4, 5, 4);
  d.labels[0] = 7;
  EXPECT_THROW(validate_batch(d, 5), ValidationError);
  EXPECT_NO_THROW(validate_batch(d, 10));
  ImageBatch e = test::random_batch(2, 2, 4, 5, 5);
  EXPECT_THROW(validate_batch(e), ValidationError);
}

TEST(Epsilon, ScalesConvert) {
  EXPECT_DOUBLE_EQ(convert_epsilon(16, EpsilonScale::Byte255).epsilon, 16.0 / 255.0);
  EXPECT_DOUBLE_EQ(convert_epsilon(0.0627, EpsilonScale::Unit).epsilon, 0.0627);
  EXPECT_THROW(convert_epsilon(-1, EpsilonScale::Byte255), ConfigError);
  EXPECT_THROW(convert_epsilon(300, EpsilonScale::Byte255), ConfigError);
  EXPECT_THROW(convert_epsilon(1.5, EpsilonScale::Unit), ConfigError);
  EXPECT_EQ(parse_epsilon_scale("0-255"), EpsilonScale::Byte255);
  EXPECT_EQ(parse_epsilon_scale("0-1"), EpsilonScale::Unit);
  EXPECT_THROW(parse_epsilon_scale("percent"), ConfigError);
}

TEST(Projection, StaysInBallAndRange) {
  const ImageBatch x = test::random_batch(5, 3, 6, 3, 11);
  Rng rng(3);
  std::normal_distribution<double> gauss(0.0, 0.5);
  Tensor cand = x.pixels;
  for (double& v : cand.values()) v += gauss(rng);
  const AttackBudget budget{8.0 / 255.0};
  const Tensor p = project_to_budget(cand, x.pixels, budget);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_LE(std::abs(p[i] - x.pixels[i]), budget.epsilon + 1e-12);
    EXPECT_GE(p[i], 0.0);
    EXPECT_LE(p[i], 1.0);
  }
  // Points already inside are untouched.
  EXPECT_EQ(project_to_budget(x.pixels, x.pixels, budget), x.pixels);
}

TEST(Latent, BroadcastAndRows) {
  const LatentCode z{{1.0, -2.0, 3.0}};
  const LatentBatch b = broadcast_latent(z, 4);
  EXPECT_EQ(b.shape(), (Shape{4, 3, 1, 1}));
  EXPECT_EQ(latent_row(b, 3).values, z.values);
}

TEST(Random, DeriveSeedSeparatesStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 100; ++i) {
    seen.insert(derive_seed(7, "a", i));
    seen.insert(derive_seed(7, "b", i));
  }
  EXPECT_EQ(seen.size(), 200u);
  EXPECT_EQ(derive_seed(7, "a", 3), derive_seed(7, "a", 3));
  EXPECT_NE(derive_seed(7, "a", 3), derive_seed(8, "a", 3));
}

TEST(Random, LatentStatistics) {
  Rng rng(42);
  const LatentBatch z = sample_latent_batch(rng, 2000, 16);
  double sum = 0.0, sq = 0.0;
  for (double v : z.values()) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(z.size());
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.03);
}

TEST(Config, ParsesAndConvertsEpsilon) {
  const RunConfig cfg = parse_run_config(
      "# toy\nseed = 5\nepsilon = 8\nepsilon_scale = 0-255\nlambda_div = 0\n"
      "gen_widths = 8, 16, 32\nattack_step_size = 0.8\n");
  EXPECT_EQ(cfg.seed, 5u);
  EXPECT_DOUBLE_EQ(cfg.epsilon.epsilon, 8.0 / 255.0);
  EXPECT_DOUBLE_EQ(cfg.attack_step_size, 0.8 / 255.0);
  EXPECT_EQ(cfg.lambda_div, 0.0);
  EXPECT_EQ(cfg.gen_widths, (std::vector<int>{8, 16, 32}));
  EXPECT_EQ(cfg.lambda_attn, 10.0);
}

TEST(Config, Defaults) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.lambda_attn, 10.0);
  EXPECT_EQ(cfg.lambda_div, 1000.0);
  EXPECT_EQ(cfg.d_z, 16);
  EXPECT_EQ(cfg.epochs, 100);
  EXPECT_EQ(cfg.learning_rate, 1e-4);
  EXPECT_EQ(cfg.batch_size, 8);
  EXPECT_EQ(cfg.beta1, 0.5);
  EXPECT_EQ(cfg.beta2, 0.999);
  EXPECT_EQ(cfg.weight_decay, 1e-5);
  EXPECT_EQ(cfg.cls_epochs, 30);
  EXPECT_EQ(cfg.cls_learning_rate, 1e-3);
  EXPECT_EQ(cfg.cls_momentum, 0.9);
  EXPECT_EQ(cfg.cls_weight_decay, 5e-4);
  EXPECT_EQ(cfg.attack_steps, 10);
  EXPECT_DOUBLE_EQ(cfg.attack_step_size, 1.6 / 255.0);
  EXPECT_DOUBLE_EQ(cfg.epsilon.epsilon, 16.0 / 255.0);
  EXPECT_EQ(cfg.attack_momentum, 1.0);
  EXPECT_EQ(cfg.dim_probability, 0.5);
}

TEST(Config, MissingRequiredKeyIsNamed) {
  try {
    parse_run_config("seed = 1\n", "toy.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("epsilon"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("toy.cfg"), std::string::npos);
  }
}

TEST(Config, UnknownKeyReportsLine) {
  try {
    parse_run_config("seed = 1\nepsilon = 16\nlamda_div = 3\n", "toy.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("toy.cfg:3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("lamda_div"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config("seed = 1\nseed = 2\nepsilon = 1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("seed = 1\nepsilon = sixteen\n"), ConfigError);
  EXPECT_THROW(parse_run_config("seed = 1\nepsilon 16\n"), ConfigError);
}

TEST(Config, CanonicalRoundTripAndHash) {
  RunConfig a = parse_run_config("seed = 3\nepsilon = 16\nlambda_attn = 1\n");
  RunConfig b = parse_run_config(a.canonical_text());
  EXPECT_EQ(a.canonical_text(), b.canonical_text());
  EXPECT_EQ(a.hash(), b.hash());
  b.lambda_attn = 2.0;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Config, ValidateRejectsBadValues) {
  RunConfig cfg;
  cfg.lambda_div = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.d_z = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace ada
