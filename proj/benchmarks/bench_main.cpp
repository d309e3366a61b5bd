// Micro-benchmarks for the hot paths: the Dirichlet solver at several grid
// resolutions, pointwise invariant extraction, Legendre inversion, and the
// adaptive geodesic-length quadrature.

#include "asphere/grid.hpp"
#include "asphere/harness.hpp"
#include "asphere/invariants.hpp"
#include "asphere/legendre.hpp"
#include "asphere/potential.hpp"
#include "asphere/solver.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

namespace {

using namespace asphere;

void solve_interval(benchmark::State& state) {
  const ConvexDomain dom = ConvexDomain::unit_ball(1);
  const GridSpec grid(dom, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto [u, rep] = solve_affine_sphere(dom, grid);
    benchmark::DoNotOptimize(rep.final_residual);
  }
  state.SetLabel("nodes=" + std::to_string(state.range(0)));
}
BENCHMARK(solve_interval)->Arg(65)->Arg(257)->Arg(1025)->Unit(benchmark::kMillisecond);

void solve_disk(benchmark::State& state) {
  const ConvexDomain dom = ConvexDomain::unit_ball(2);
  const GridSpec grid(dom, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto [u, rep] = solve_affine_sphere(dom, grid);
    benchmark::DoNotOptimize(rep.final_residual);
  }
  state.SetLabel("nodes=" + std::to_string(state.range(0)) + "^2");
}
BENCHMARK(solve_disk)->Arg(33)->Arg(65)->Arg(129)->Unit(benchmark::kMillisecond);

void solve_square(benchmark::State& state) {
  // No closed form; corner-limited, so the Newton loop actually runs.
  const ConvexDomain dom = ConvexDomain::square(1.0);
  const GridSpec grid(dom, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto [u, rep] = solve_affine_sphere(dom, grid);
    benchmark::DoNotOptimize(rep.final_residual);
  }
  state.SetLabel("nodes=" + std::to_string(state.range(0)) + "^2");
}
BENCHMARK(solve_square)->Arg(33)->Arg(65)->Unit(benchmark::kMillisecond);

void metric_eval(benchmark::State& state) {
  const PotentialField u = builtin_ball(2);
  const Vec t = vec2(0.3, -0.4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(metric_at(MetricKind::Centroaffine, u, t));
    benchmark::DoNotOptimize(metric_at(MetricKind::Calabi, u, t));
  }
}
BENCHMARK(metric_eval);

void residual_on_grid_field(benchmark::State& state) {
  const ConvexDomain dom = ConvexDomain::unit_ball(2);
  const GridSpec grid(dom, 65);
  auto [u, rep] = solve_affine_sphere(dom, grid);
  const Vec t = vec2(0.3, -0.4);
  for (auto _ : state)
    benchmark::DoNotOptimize(affine_sphere_residual(u, t));
}
BENCHMARK(residual_on_grid_field);

void fubini_pick(benchmark::State& state) {
  const PotentialField f = builtin_hyperboloid(2);
  const Vec x = vec2(0.5, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(fubini_pick_at(f, x));
}
BENCHMARK(fubini_pick);

void conormal_pair(benchmark::State& state) {
  const PotentialField f = builtin_hyperboloid(2);
  const Vec x = vec2(0.5, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(conormals_at(f, x));
}
BENCHMARK(conormal_pair);

void legendre_inverse(benchmark::State& state) {
  const LegendrePair pair = legendre_transform(builtin_hyperboloid(2, 10.0));
  const Vec x = vec2(4.0, -7.0);
  const Vec y = pair.primal().gradient_at(x);
  for (auto _ : state) benchmark::DoNotOptimize(pair.inverse(y));
}
BENCHMARK(legendre_inverse);

void geodesic_decade(benchmark::State& state) {
  const PotentialField f = builtin_hyperboloid(1, 2e5);
  const double z1 = std::pow(10.0, static_cast<double>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(geodesic_length(f, vec1(1.0), 0.0, z1));
  state.SetLabel("to 10^" + std::to_string(state.range(0)));
}
BENCHMARK(geodesic_decade)->Arg(1)->Arg(3)->Arg(5)->Unit(benchmark::kMicrosecond);

void gradient_scan(benchmark::State& state) {
  const PotentialField hyp = builtin_hyperboloid(1, 12.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(gradient_estimate_scan(hyp, 4.0, 129));
  state.SetLabel("h=4, 1-d");
}
BENCHMARK(gradient_scan)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
