#include <gtest/gtest.h>

#include <cmath>

#include "ada/errors.hpp"
#include "ada/generator.hpp"
#include "ada/random.hpp"
#include "support.hpp"

namespace ada {
namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.d_z = 4;
  c.widths = {4, 6, 8};
  return c;
}

TEST(Generator, OutputShapeAndRange) {
  const GeneratorNet net(small_config(), 1);
  const ImageBatch b = test::random_batch(3, 3, 16, 5, 2);
  Rng rng(3);
  const LatentBatch z = sample_latent_batch(rng, 3, 4);
  const Tensor g = net.generate(b.pixels, z);
  EXPECT_EQ(g.shape(), b.pixels.shape());
  for (double v : g.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Generator, RejectsBadInputs) {
  const GeneratorNet net(small_config(), 1);
  Rng rng(4);
  const ImageBatch b = test::random_batch(2, 3, 16, 5, 5);
  const LatentBatch wrong_len = sample_latent_batch(rng, 2, 5);
  try {
    (void)net.generate(b.pixels, wrong_len);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("d_z"), std::string::npos);
  }
  EXPECT_THROW((void)net.generate(b.pixels, sample_latent_batch(rng, 3, 4)), ShapeError);
  EXPECT_THROW((void)net.generate(Tensor(Shape{2, 3, 12, 12}), sample_latent_batch(rng, 2, 4)), ShapeError);
  EXPECT_THROW((void)net.generate(Tensor(Shape{2, 1, 16, 16}), sample_latent_batch(rng, 2, 4)), ShapeError);
}

TEST(Generator, LatentCodeChangesOutput) {
  const GeneratorNet net(small_config(), 6);
  const ImageBatch b = test::random_batch(2, 3, 16, 5, 7);
  Rng rng(8);
  const LatentCode z1 = sample_latent(rng, 4), z2 = sample_latent(rng, 4);
  EXPECT_GT(max_abs_diff(net.generate(b.pixels, z1), net.generate(b.pixels, z2)), 0.0);
  EXPECT_EQ(net.generate(b.pixels, z1), net.generate(b.pixels, broadcast_latent(z1, 2)));
}

TEST(Generator, WeightInitStandardDeviation) {
  GeneratorConfig c;
  c.widths = {16, 32, 64};
  GeneratorNet net(c, 9);
  double sq = 0.0;
  std::size_t count = 0;
  // Conv weights only: slots 0, 3, 6 (encoder), 9, 12, 15 (decoder), 18 (head).
  auto params = net.params();
  for (std::size_t slot : {0u, 3u, 6u, 9u, 12u, 15u, 18u}) {
    for (double v : params[slot]->values()) {
      sq += v * v;
      ++count;
    }
  }
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(count)), 0.02, 0.002);
}

TEST(Generator, ZeroHeadGivesIdentityCraft) {
  GeneratorNet net(small_config(), 10);
  for (Tensor* p : net.head().params()) p->fill(0.0);
  const ImageBatch b = test::random_batch(3, 3, 16, 5, 11);
  Rng rng(12);
  const ImageBatch adv = craft(net, b, sample_latent_batch(rng, 3, 4), AttackBudget{16.0 / 255.0});
  EXPECT_EQ(adv.pixels, b.pixels);
  EXPECT_EQ(adv.labels, b.labels);
}

TEST(Generator, CraftRespectsBudget) {
  const GeneratorNet net = test::tiny_generator(13, 4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ImageBatch b = test::random_batch(4, 3, 8, 5, 100 + seed);
    Rng rng(seed);
    const AttackBudget budget{(1.0 + static_cast<double>(seed)) / 255.0};
    const ImageBatch adv = craft(net, b, sample_latent_batch(rng, 4, 4), budget);
    for (std::size_t i = 0; i < adv.pixels.size(); ++i) {
      EXPECT_LE(std::abs(adv.pixels[i] - b.pixels[i]), budget.epsilon + 1e-12);
      EXPECT_GE(adv.pixels[i], 0.0);
      EXPECT_LE(adv.pixels[i], 1.0);
    }
  }
}

TEST(Generator, SaveLoadBitwise) {
  GeneratorConfig c = small_config();
  c.skip_connections = true;
  const GeneratorNet net(c, 14);
  const auto dir = test::temp_dir("generator");
  net.save(dir / "g.ckpt", {{"note", "x"}});
  nlohmann::json meta;
  const GeneratorNet back = GeneratorNet::load(dir / "g.ckpt", &meta);
  EXPECT_EQ(back.weights_hash(), net.weights_hash());
  EXPECT_EQ(meta.at("note"), "x");
  EXPECT_TRUE(back.config().skip_connections);
  const ImageBatch b = test::random_batch(2, 3, 16, 5, 15);
  Rng rng(16);
  const LatentBatch z = sample_latent_batch(rng, 2, 4);
  EXPECT_EQ(back.generate(b.pixels, z), net.generate(b.pixels, z));
}

// d<g(x,z), r>/dtheta against central differences, both batch-norm modes.
void check_generator_backward(bool skip, nn::Mode mode) {
  GeneratorConfig c;
  c.d_z = 2;
  c.widths = {2, 2, 3};
  c.skip_connections = skip;
  GeneratorNet net(c, 17);
  Rng rng(18);
  for (Tensor* p : net.params()) fill_normal(*p, rng, 0.4);
  const ImageBatch b = test::random_batch(3, 3, 8, 5, 19);
  const LatentBatch z = sample_latent_batch(rng, 3, 2);
  Tensor r(b.pixels.shape());
  fill_normal(r, rng, 1.0);
  auto loss = [&] {
    const Tensor g = net.forward(b.pixels, z, mode).perturbation;
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * r[i];
    return s;
  };
  const auto pass = net.forward(b.pixels, z, mode);
  nn::Gradients grads = net.zero_gradients();
  net.backward(pass, r, grads);
  auto params = net.params();
  const double h = 1e-6;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    for (std::size_t i = 0; i < t.size(); i += std::max<std::size_t>(1, t.size() / 6)) {
      const double o = t[i];
      t[i] = o + h;
      const double lp = loss();
      t[i] = o - h;
      const double lm = loss();
      t[i] = o;
      const double fd = (lp - lm) / (2 * h);
      EXPECT_NEAR(grads[p][i], fd, 1e-4 + 1e-3 * std::abs(fd)) << "slot " << p << " index " << i;
    }
  }
}

TEST(Generator, BackwardEvalMode) { check_generator_backward(false, nn::Mode::Eval); }
TEST(Generator, BackwardTrainMode) { check_generator_backward(false, nn::Mode::Train); }
TEST(Generator, BackwardWithSkips) { check_generator_backward(true, nn::Mode::Train); }

TEST(Craft, BackwardMasksClippedPixels) {
  CraftPass pass;
  const Tensor clean(Shape{1, 1, 1, 3}, std::vector<double>{0.5, 0.99, 0.5});
  const AttackBudget budget{0.1};
  pass.candidate = Tensor(clean.shape(), std::vector<double>{0.55, 1.04, 0.3});
  const Tensor g = craft_backward(pass, clean, Tensor(clean.shape(), 1.0), budget);
  EXPECT_DOUBLE_EQ(g[0], 0.1);  // inside the ball
  EXPECT_EQ(g[1], 0.0);         // clipped at 1
  EXPECT_EQ(g[2], 0.0);         // clipped at x - eps
}

TEST(TileLatent, Broadcasts) {
  const LatentBatch z(Shape{2, 2, 1, 1}, std::vector<double>{1, 2, 3, 4});
  const Tensor t = tile_latent(z, 3, 2);
  EXPECT_EQ(t.shape(), (Shape{2, 2, 3, 2}));
  EXPECT_EQ(t.at(1, 0, 2, 1), 3.0);
  EXPECT_EQ(t.at(0, 1, 0, 0), 2.0);
}

}  // namespace
}  // namespace ada
