#include <random>

#include <benchmark/benchmark.h>

#include "efcn/backbone.hpp"
#include "efcn/belief.hpp"
#include "efcn/data.hpp"
#include "efcn/ds_layer.hpp"
#include "efcn/model.hpp"
#include "efcn/training.hpp"
#include "efcn/utility.hpp"

using namespace efcn;

namespace {

Tensor noise(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t = Tensor::hwc(h, w, c);
  for (double& v : t.storage()) v = n(rng);
  return t;
}

void BM_DsForwardMap(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const PrototypeBank bank = PrototypeBank::random(n, 16, 3, rng);
  const Tensor x = noise(32, 32, 16, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ds_forward_map(x, bank));
  state.SetItemsProcessed(state.iterations() * 32 * 32);
}
BENCHMARK(BM_DsForwardMap)->Arg(5)->Arg(15)->Arg(60);

void BM_Conv3x3(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.1);
  ConvSpec s;
  s.kernel_h = s.kernel_w = 3;
  s.depth = d;
  s.filters = 16;
  s.kernel.resize(s.kernel_size());
  for (double& v : s.kernel) v = n(rng);
  const Tensor x = noise(34, 34, d, 4);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_valid(x, s));
}
BENCHMARK(BM_Conv3x3)->Arg(3)->Arg(16);

void BM_SolveOwa(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(solve_owa(0.8, k));
}
BENCHMARK(BM_SolveOwa)->Arg(3)->Arg(8)->Arg(32);

void BM_Combine(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  MassVector a{std::vector<double>(m, 0.5 / static_cast<double>(m)), 0.5};
  MassVector b{std::vector<double>(m, 0.3 / static_cast<double>(m)), 0.7};
  b.singletons[0] += 0.1;
  b.omega -= 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(normalize(combine_simple(a, b)));
}
BENCHMARK(BM_Combine)->Arg(3)->Arg(20);

// Forward and backward pass over one 32 x 32 training image.
void BM_TrainSample(benchmark::State& state) {
  const Frame f({"background", "class1", "class2"});
  SyntheticConfig cfg;
  cfg.train = 1;
  cfg.test = 1;
  const SegDataset ds = gen_synthetic(f, cfg);
  const auto labels = ds.soft_labels(ds.train);
  const ActList acts = build_act_list(f, labels);
  const UtilityTable table = UtilityTable::identity(f, acts, 0.8, labels);
  const Model model = Model::create(f, Architecture::toy(), 15, acts, 0.8, 0);
  TargetCache cache(table);
  ModelGrad grad = ModelGrad::zeros_like(model);
  for (auto _ : state) {
    grad.clear();
    benchmark::DoNotOptimize(accumulate_sample(model, ds.samples[ds.train[0]], cache, &grad));
  }
}
BENCHMARK(BM_TrainSample);

}  // namespace
BENCHMARK_MAIN();
