#include <benchmark/benchmark.h>

#include <random>

#include "qpkam/config.hpp"
#include "qpkam/diophantine.hpp"
#include "qpkam/evolution.hpp"
#include "qpkam/kam.hpp"
#include "qpkam/pipeline.hpp"

using namespace qpkam;

namespace {

AnalyticField random_field(const Envelope& env, int kcut, int count, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> lv(-2, 2), kv(-kcut, kcut);
  std::normal_distribution<double> c(0.0, 1.0);
  AnalyticField f(env, 0.5, kcut);
  for (int i = 0; i < count; ++i)
    f.add(MultiIndex::unit(1, lv(gen)) + MultiIndex::unit(2, lv(gen)), kv(gen), Complex(c(gen), c(gen)));
  return f;
}

RunConfig small_reference(int J) {
  RunConfig cfg = load_config(std::string(QPKAM_SOURCE_DIR) + "/configs/reference.json");
  cfg.jmax = J;
  cfg.lmax = 6;
  cfg.pad = 6;
  return cfg;
}

void BM_FieldProduct(benchmark::State& st) {
  const Envelope env{1.0, 12.0, 64};
  const int K = static_cast<int>(st.range(0));
  AnalyticField a = random_field(env, K, 40, 1), b = random_field(env, K, 40, 2);
  for (auto _ : st) benchmark::DoNotOptimize(a * b);
}
BENCHMARK(BM_FieldProduct)->Arg(8)->Arg(16)->Arg(32);

void BM_Regularize(benchmark::State& st) {
  BuiltInput b = build_input(small_reference(static_cast<int>(st.range(0))));
  for (auto _ : st) benchmark::DoNotOptimize(regularize(b.input, {.J = static_cast<int>(st.range(0)), .pad = 6}));
}
BENCHMARK(BM_Regularize)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_KamIterate(benchmark::State& st) {
  const int J = static_cast<int>(st.range(0));
  RunConfig cfg = small_reference(J);
  BuiltInput b = build_input(cfg);
  RegularizedForm rf = regularize(b.input, {.J = J, .pad = 6});
  std::vector<double> mu;
  for (int k = -J; k <= J; ++k) mu.push_back(normal_form_mu(rf.lambdas, k));
  KamInput ki{normal_form_blocks(mu, J), rf.remainder(), b.input.omega, 0.5};
  for (auto _ : st) benchmark::DoNotOptimize(kam_iterate(ki, KamOptions{}));
}
BENCHMARK(BM_KamIterate)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_DirectEvolver(benchmark::State& st) {
  const int J = static_cast<int>(st.range(0));
  BuiltInput b = build_input(small_reference(J));
  DirectEvolver ev(b.input, J);
  ModeVector u0 = default_initial_datum(J);
  for (auto _ : st) benchmark::DoNotOptimize(ev.run(u0, 0.0, 0.1, 1e-3));
}
BENCHMARK(BM_DirectEvolver)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_MonteCarloMeasure(benchmark::State& st) {
  MeasureOptions opt;
  opt.d = 3;
  opt.L = 4.0;
  opt.samples = static_cast<std::size_t>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(measure_monte_carlo({0.1, 0.05}, opt));
}
BENCHMARK(BM_MonteCarloMeasure)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
