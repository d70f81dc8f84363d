#include <gtest/gtest.h>

#include <cmath>

#include "ada/attention.hpp"
#include "ada/errors.hpp"
#include "ada/model_zoo.hpp"
#include "support.hpp"

namespace ada {
namespace {

TEST(Classifier, ShapesAndFeatureLayer) {
  const Classifier m = test::tiny_cnn(1);
  const ImageBatch b = test::random_batch(3, 3, 8, 5, 2);
  EXPECT_EQ(m.predict(b.pixels).shape(), (Shape{3, 5, 1, 1}));
  const ForwardPass pass = m.forward_with_features(b.pixels);
  EXPECT_EQ(pass.features().shape(), (Shape{3, 6, 2, 2}));
  EXPECT_EQ(m.feature_layer(), "relu2");
  EXPECT_EQ(max_abs_diff(m.logits_from_features(pass.features()), pass.logits()), 0.0);
}

TEST(Classifier, RejectsWrongInput) {
  const Classifier m = test::tiny_cnn(1);
  EXPECT_THROW(m.predict(Tensor(Shape{1, 3, 9, 8})), Error);
  EXPECT_THROW(m.predict(Tensor(Shape{1, 1, 8, 8})), Error);
}

TEST(Classifier, FeatureLayerMustHavePiecewiseLinearHead) {
  Classifier m = test::tiny_cnn(1);
  EXPECT_NO_THROW(m.set_feature_layer("relu1"));
  EXPECT_EQ(m.feature_layer(), "relu1");
  EXPECT_THROW(m.set_feature_layer("fc1"), Error);  // 1 x 1 output is not a spatial map
  EXPECT_THROW(m.set_feature_layer("nope"), Error);
}

TEST(Classifier, InferenceDoesNotMutateAndSaveLoadIsExact) {
  const Classifier m = test::tiny_cnn(3);
  const std::string before = m.weights_hash();
  const ImageBatch b = test::random_batch(2, 3, 8, 5, 4);
  (void)m.predict(b.pixels);
  (void)attention(m, b);
  EXPECT_EQ(before, m.weights_hash());

  const auto dir = test::temp_dir("classifier");
  m.save(dir / "m.ckpt");
  const Classifier back = Classifier::load(dir / "m.ckpt");
  EXPECT_EQ(back.weights_hash(), before);
  EXPECT_EQ(back.predict(b.pixels), m.predict(b.pixels));
  EXPECT_EQ(back.feature_layer(), m.feature_layer());
}

TEST(Classifier, GradWrtMatchesFiniteDifferences) {
  const Classifier m = test::tiny_cnn(4);
  const ImageBatch b = test::random_batch(2, 3, 8, 5, 5);
  const LogitObjective obj = class_logit_objective(b.labels);
  const Tensor g = m.grad_wrt(b.pixels, obj, GradTarget::Input);
  Tensor x = b.pixels;
  auto value = [&] {
    const Tensor z = m.predict(x);
    return z.at(0, b.labels[0], 0, 0) + z.at(1, b.labels[1], 0, 0);
  };
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); i += 13) {
    const double o = x[i];
    x[i] = o + h;
    const double p = value();
    x[i] = o - h;
    const double q = value();
    x[i] = o;
    EXPECT_NEAR(g[i], (p - q) / (2 * h), 1e-6);
  }
}

TEST(ModelZoo, ManifestRoundTrip) {
  const auto dir = test::temp_dir("zoo");
  {
    ModelZoo zoo(dir);
    zoo.add(test::tiny_cnn(1));
    zoo.add(make_toy_model(ToyArch::LinearProbe, "probe", 3, 8, 5, 2));
  }
  const ModelZoo zoo = ModelZoo::open(dir);
  EXPECT_TRUE(zoo.contains("tiny"));
  EXPECT_TRUE(zoo.contains("probe"));
  EXPECT_FALSE(zoo.contains("absent"));
  EXPECT_EQ(zoo.load("tiny").weights_hash(), test::tiny_cnn(1).weights_hash());
  EXPECT_THROW(zoo.load("absent"), Error);
}

TEST(ToyModels, ArchitecturesBuild) {
  for (ToyArch arch : {ToyArch::CnnA, ToyArch::CnnB, ToyArch::LinearProbe}) {
    const Classifier m = make_toy_model(arch, to_string(arch), 3, 32, 10, 1);
    EXPECT_EQ(m.predict(Tensor(Shape{1, 3, 32, 32}, 0.5)).shape(), (Shape{1, 10, 1, 1}));
    EXPECT_EQ(parse_toy_arch(to_string(arch)), arch);
  }
}

// Brute force: dy_t/dF element by element, spatial mean, scale, normalize.
AttentionMap oracle_attention(const Classifier& m, const ImageBatch& b) {
  const Tensor f = m.forward_with_features(b.pixels).features();
  const Shape s = f.shape();
  Tensor weights(Shape{s.n, s.c, 1, 1});
  const double h = 1e-6;
  for (int n = 0; n < s.n; ++n) {
    const Tensor one = slice_samples(f, n, n + 1);
    for (int c = 0; c < s.c; ++c) {
      double sum = 0.0;
      for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j) {
          Tensor p = one, q = one;
          p.at(0, c, i, j) += h;
          q.at(0, c, i, j) -= h;
          const int t = b.labels[static_cast<std::size_t>(n)];
          sum += (m.logits_from_features(p).at(0, t, 0, 0) - m.logits_from_features(q).at(0, t, 0, 0)) / (2 * h);
        }
      weights.at(n, c, 0, 0) = sum / (s.h * s.w);
    }
  }
  Tensor a(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      double norm = 0.0;
      for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j) norm += std::pow(weights.at(n, c, 0, 0) * f.at(n, c, i, j), 2);
      norm = std::sqrt(norm);
      for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j)
          a.at(n, c, i, j) = weights.at(n, c, 0, 0) * f.at(n, c, i, j) / (norm + kChannelNormDelta);
    }
  return {a, true};
}

TEST(Attention, MatchesBruteForceOracle) {
  const Classifier m = test::tiny_cnn(9);
  const ImageBatch b = test::random_batch(3, 3, 8, 5, 10);
  const AttentionMap fast = attention(m, b);
  const AttentionMap slow = oracle_attention(m, b);
  EXPECT_TRUE(fast.normalized);
  EXPECT_LT(max_abs_diff(fast.values, slow.values), 1e-6);
}

TEST(Attention, ChannelsHaveUnitNorm) {
  const Classifier m = test::tiny_cnn(11);
  const ImageBatch b = test::random_batch(2, 3, 8, 5, 12);
  const AttentionPass pass = attention_pass(m, b.pixels, b.labels, true);
  const Shape s = pass.map.values.shape();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      double raw = 0.0, sq = 0.0;
      for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j) {
          raw += std::pow(pass.raw.at(n, c, i, j), 2);
          sq += std::pow(pass.map.values.at(n, c, i, j), 2);
        }
      // |A_c| = |raw_c| / (|raw_c| + delta)
      const double r = std::sqrt(raw);
      EXPECT_NEAR(std::sqrt(sq), r / (r + kChannelNormDelta), 1e-12);
      if (raw == 0.0) EXPECT_EQ(sq, 0.0);
    }
}

TEST(Attention, RawModeSkipsNormalization) {
  const Classifier m = test::tiny_cnn(13);
  const ImageBatch b = test::random_batch(2, 3, 8, 5, 14);
  const AttentionPass pass = attention_pass(m, b.pixels, b.labels, false);
  EXPECT_FALSE(pass.map.normalized);
  EXPECT_EQ(pass.map.values, pass.raw);
  EXPECT_THROW(attention_distance(pass.map, attention(m, b)), Error);
}

TEST(Attention, NormalizeBackwardMatchesFiniteDifferences) {
  Tensor raw(Shape{2, 3, 2, 2});
  Rng rng(15);
  fill_normal(raw, rng, 1.0);
  Tensor r(raw.shape());
  fill_normal(r, rng, 1.0);
  auto loss = [&](const Tensor& x) {
    const AttentionMap a = channel_normalize({x, false});
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += a.values[i] * r[i];
    return s;
  };
  const Tensor g = channel_normalize_backward(raw, r);
  const double h = 1e-6;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Tensor p = raw, q = raw;
    p[i] += h;
    q[i] -= h;
    EXPECT_NEAR(g[i], (loss(p) - loss(q)) / (2 * h), 1e-6);
  }
}

TEST(Attention, ExplicitClassAndHeatmap) {
  const Classifier m = test::tiny_cnn(16);
  const ImageBatch b = test::random_batch(2, 3, 8, 5, 17);
  const std::vector<int> other{(b.labels[0] + 1) % 5, (b.labels[1] + 1) % 5};
  const AttentionMap a = attention(m, b);
  const AttentionMap c = attention(m, b, other);
  EXPECT_GT(max_abs_diff(a.values, c.values), 0.0);
  const Tensor heat = attention_heatmap(a, 1);
  EXPECT_EQ(heat.shape(), (Shape{1, 1, 2, 2}));
  for (double v : heat.values()) EXPECT_GE(v, 0.0);
}

TEST(Attention, DistanceIsAMetric) {
  const Classifier m = test::tiny_cnn(18);
  const ImageBatch b = test::random_batch(3, 3, 8, 5, 19);
  ImageBatch c = b;
  for (double& v : c.pixels.values()) v = std::min(1.0, v + 0.05);
  const AttentionMap a = attention(m, b), d = attention(m, c);
  for (double v : attention_distance(a, a)) EXPECT_EQ(v, 0.0);
  const auto ab = attention_distance(a, d), ba = attention_distance(d, a);
  for (std::size_t i = 0; i < ab.size(); ++i) {
    EXPECT_GE(ab[i], 0.0);
    EXPECT_DOUBLE_EQ(ab[i], ba[i]);
  }
}

}  // namespace
}  // namespace ada
