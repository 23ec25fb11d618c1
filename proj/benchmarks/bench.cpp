#include <benchmark/benchmark.h>

#include "fnns/arith.hpp"
#include "fnns/boundary.hpp"
#include "fnns/nn.hpp"
#include "fnns/plan.hpp"
#include "fnns/rng.hpp"

using namespace fnns;

namespace {

std::vector<float> random_vector(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = rng.uniform(-1.0f, 1.0f);
  return v;
}

Tensor random_image(std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor t({28, 28, 1});
  for (auto& x : t.data()) x = rng.unit();
  return t;
}

void register_per_profile(const char* name, void (*fn)(benchmark::State&, const ExecProfile&)) {
  for (const auto& p : list_profiles()) {
    benchmark::RegisterBenchmark((std::string(name) + "/" + p.id).c_str(), fn, p)->Arg(64)->Arg(784)->Arg(4096);
  }
}

void reduce_sum_bench(benchmark::State& state, const ExecProfile& p) {
  const auto v = random_vector(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(reduce_sum(v, p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void dot_bench(benchmark::State& state, const ExecProfile& p) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(n, 2), b = random_vector(n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(dot(a, b, p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void forward_bench(benchmark::State& state, const ExecProfile& p) {
  const auto m = build_toy_cnn({28, 28, 1}, 10, 1);
  const auto x = random_image(4);
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, x, p));
}

void BM_MockForward(benchmark::State& state) {
  const auto specs = default_sweep_specs(0);
  const auto m = build_mock(specs.at(static_cast<std::size_t>(state.range(0))));
  const auto x = random_image(5);
  const auto& p = find_profile("seq32");
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, x, p));
  state.SetLabel(m.name);
}
BENCHMARK(BM_MockForward)->DenseRange(0, 5);

void BM_InputGradient(benchmark::State& state) {
  const auto m = build_toy_cnn({28, 28, 1}, 10, 1);
  const auto x = random_image(6);
  const auto& p = find_profile("seq32");
  for (auto _ : state) benchmark::DoNotOptimize(input_gradient(m, x, 3, p));
}
BENCHMARK(BM_InputGradient);

void BM_BoundaryStep(benchmark::State& state) {
  const auto m = build_toy_cnn({28, 28, 1}, 10, 1);
  const auto x = random_image(7);
  const auto& p = find_profile("seq32");
  const auto label = predict_label(m, x, p);
  for (auto _ : state) {
    const auto g = backprop(m, x, label, p, false);
    benchmark::DoNotOptimize(fgsm_step(x, g.input, 0.01f, top2_gap(g.output).gap, 1));
  }
}
BENCHMARK(BM_BoundaryStep);

void BM_PreparePlan(benchmark::State& state) {
  const auto m = build_foldable_model(0);
  const auto& p = list_profiles().at(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(prepare_plan(m, p, 1e-3f));
  state.SetLabel(p.id);
}
BENCHMARK(BM_PreparePlan)->DenseRange(0, 6);

const int registered = [] {
  register_per_profile("BM_ReduceSum", reduce_sum_bench);
  register_per_profile("BM_Dot", dot_bench);
  for (const auto& p : list_profiles()) {
    benchmark::RegisterBenchmark(("BM_ToyCnnForward/" + p.id).c_str(), forward_bench, p);
  }
  return 0;
}();

}  // namespace

BENCHMARK_MAIN();
