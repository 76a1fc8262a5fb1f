#include "memsde/measure.hpp"
#include "memsde/noise.hpp"
#include "memsde/problem.hpp"
#include "memsde/scheme.hpp"
#include "memsde/simulate.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace memsde;

static void BM_Philox(benchmark::State& state) {
  Philox4x64::Counter c{0, 0, 0, 0};
  for (auto _ : state) {
    c = Philox4x64::block(c, {1, 2});
    benchmark::DoNotOptimize(c);
  }
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Philox);

static void BM_StandardNormals(benchmark::State& state) {
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  std::uint64_t first = 0;
  for (auto _ : state) {
    standard_normals(7, 3, first, out.size(), out.data());
    first += out.size();
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StandardNormals)->Arg(32)->Arg(1024);

static void BM_AdvanceChunk(benchmark::State& state) {
  const SdeProblem p = make_builtin(BuiltinProblem::DoubleWell, {{"d", 1.0}});
  const auto kind = static_cast<SchemeKind>(state.range(0));
  const SchemeSpec s = SchemeSpec::for_problem(kind, p);
  const std::size_t n = kChunkSize;
  std::vector<double> y(n, 0.5), w(n);
  standard_normals(1, 0, 0, n, w.data());
  for (auto& v : w) v *= 0.01;
  StepWorkspace ws;
  for (auto _ : state) {
    s.advance(p, 1e-4, 1e-4, n, y.data(), w.data(), ws);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_AdvanceChunk)->Arg(0)->Arg(1)->Arg(2);

static void BM_SimulateEnsemble(benchmark::State& state) {
  const SdeProblem p = make_builtin(BuiltinProblem::DoubleWell, {{"d", 1.0}});
  const SchemeSpec s = SchemeSpec::tem(p.gamma());
  const auto x0 = InitialCondition::point(Vec::Zero(1));
  for (auto _ : state) {
    const Ensemble e = simulate_ensemble(p, s, x0, 1.0 / 256, 1.0, 1024, 1);
    benchmark::DoNotOptimize(e.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * 1024 * 256);
}
BENCHMARK(BM_SimulateEnsemble);

static void BM_W1Sorted(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  SampleMatrix a(n, 1), b(n, 1);
  standard_normals(1, 0, 0, static_cast<std::size_t>(n), a.data());
  standard_normals(1, 1, 0, static_cast<std::size_t>(n), b.data());
  const EmpiricalMeasure ma(a), mb(b);
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein1_sorted(ma, mb));
}
BENCHMARK(BM_W1Sorted)->Arg(1000)->Arg(100000);

static void BM_W1Matching(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  SampleMatrix a(n, 2), b(n, 2);
  standard_normals(1, 0, 0, static_cast<std::size_t>(2 * n), a.data());
  standard_normals(1, 1, 0, static_cast<std::size_t>(2 * n), b.data());
  const EmpiricalMeasure ma(a), mb(b);
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein1_matching(ma, mb));
}
BENCHMARK(BM_W1Matching)->Arg(64)->Arg(512);

BENCHMARK_MAIN();
