#include <benchmark/benchmark.h>

#include "cjl/classify.hpp"
#include "cjl/exp_map.hpp"
#include "cjl/sturm.hpp"

using namespace cjl;

static void BM_ExpJetEllipsoid(benchmark::State& state) {
  auto m = make_ellipsoid({1.0, 1.1, 1.25, 1.0});
  Vec3 p(0.6, 0.3, -0.2), x(0.4, 1.2, -0.9);
  for (auto _ : state) benchmark::DoNotOptimize(exp_jet(*m, p, x));
}
BENCHMARK(BM_ExpJetEllipsoid);

static void BM_ConjugateRadiusEllipsoid(benchmark::State& state) {
  auto m = make_ellipsoid({1.0, 1.1, 1.25, 1.0});
  Vec3 p(0.6, 0.3, -0.2), u = Vec3(0.2, 0.7, -0.3).normalized();
  for (auto _ : state) benchmark::DoNotOptimize(conjugate_radii(*m, p, u, 1, 6.0));
}
BENCHMARK(BM_ConjugateRadiusEllipsoid)->Unit(benchmark::kMillisecond);

static void BM_D4PlusAnalysis(benchmark::State& state) {
  double a = -4.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(d4_root_analysis(a, -2.5, D4Variant::plus));
    a = a < -1.5 ? a + 0.01 : -4.0;
  }
}
BENCHMARK(BM_D4PlusAnalysis);

static void BM_SturmExactFallback(benchmark::State& state) {
  const std::vector<double> triple{1.0, -3.0, 3.0, -1.0};
  for (auto _ : state) benchmark::DoNotOptimize(sturm_count(triple));
}
BENCHMARK(BM_SturmExactFallback);

static void BM_ClassifySyntheticA3(benchmark::State& state) {
  SyntheticSpec s;
  s.cls = NormalFormClass::A3;
  SyntheticField E(s);
  for (auto _ : state) benchmark::DoNotOptimize(classify(E, Vec3(-0.5, 0.75, 0.0)));
}
BENCHMARK(BM_ClassifySyntheticA3);

BENCHMARK_MAIN();
