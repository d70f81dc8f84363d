// Throughput of the hot paths on toy-suite shapes (3 x 32 x 32 inputs).

#include <memory>

#include <benchmark/benchmark.h>

#include "ada/attention.hpp"
#include "ada/baselines.hpp"
#include "ada/dataset.hpp"
#include "ada/evaluation.hpp"
#include "ada/generator.hpp"
#include "ada/objectives.hpp"
#include "ada/random.hpp"

namespace {

using namespace ada;

const ImageBatch& images() {
  static const ImageBatch batch = make_toy_shapes({32, 32, 3, 10, 0.06}, 1);
  return batch;
}

const Classifier& cnn_a() {
  static const Classifier model = make_toy_model(ToyArch::CnnA, "cnn-a", 3, 32, 10, 7);
  return model;
}

GeneratorNet toy_generator() {
  GeneratorConfig cfg;
  cfg.widths = {16, 32, 64};
  return GeneratorNet(cfg, 3);
}

ImageBatch first(int n) { return take(images(), 0, n); }

void BM_Predict(benchmark::State& state) {
  const ImageBatch b = first(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cnn_a().predict(b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Predict)->Arg(1)->Arg(8)->Arg(32);

void BM_Attention(benchmark::State& state) {
  const ImageBatch b = first(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(attention(cnn_a(), b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Attention)->Arg(1)->Arg(8)->Arg(32);

void BM_InputGradient(benchmark::State& state) {
  const ImageBatch b = first(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradient(cnn_a(), b.pixels, b.labels));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_InputGradient)->Arg(8)->Arg(32);

void BM_Craft(benchmark::State& state) {
  const GeneratorNet net = toy_generator();
  const ImageBatch b = first(static_cast<int>(state.range(0)));
  Rng rng(5);
  const LatentBatch z = sample_latent_batch(rng, b.size(), net.config().d_z);
  for (auto _ : state) benchmark::DoNotOptimize(craft(net, b, z, {16.0 / 255.0}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Craft)->Arg(8)->Arg(32);

// One generator training step: two crafts, three losses, full backward.
void BM_GeneratorObjective(benchmark::State& state) {
  GeneratorNet net = toy_generator();
  const ImageBatch b = first(8);
  const AttentionMap clean = attention(cnn_a(), b);
  Rng rng(6);
  const LatentBatch z1 = sample_latent_batch(rng, 8, net.config().d_z);
  const LatentBatch z2 = sample_latent_batch(rng, 8, net.config().d_z);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        generator_objective(net, cnn_a(), b, clean, z1, z2, {16.0 / 255.0}, {}, nn::Mode::Train, true));
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_GeneratorObjective)->Unit(benchmark::kMillisecond);

void BM_Baseline(benchmark::State& state, const char* name) {
  const Attack attack = make_baseline(name, {});
  const ImageBatch b = first(8);
  for (auto _ : state) benchmark::DoNotOptimize(attack.run(cnn_a(), b, {1, 0}));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK_CAPTURE(BM_Baseline, fgsm, "fgsm")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Baseline, bim, "bim")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Baseline, mi_fgsm, "mi-fgsm")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Baseline, dim, "dim")->Unit(benchmark::kMillisecond);

void BM_Pca(benchmark::State& state) {
  const int n = 200, d = 256;
  std::vector<double> rows(static_cast<std::size_t>(n * d));
  Rng rng(7);
  std::normal_distribution<double> gauss;
  for (double& v : rows) v = gauss(rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_pca(rows, n, d, 2));
}
BENCHMARK(BM_Pca)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
