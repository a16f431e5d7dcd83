#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "otg/band_matrix.hpp"
#include "otg/spline.hpp"

namespace {

using namespace otg;

WaypointMatrix random_walk(Eigen::Index n, Eigen::Index dof, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> step(0.0, 0.05);
  WaypointMatrix Q(n, dof);
  Q.row(0).setZero();
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 0; j < dof; ++j) Q(i, j) = Q(i - 1, j) + step(rng);
  }
  return Q;
}

void BM_MinStretch(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const WaypointMatrix Q = random_walk(n, 7, 1);
  const KnotSequence knots(std::vector<double>(static_cast<std::size_t>(n - 1), 0.05));
  const StretchWeights weights{0.999, {}};
  const BoundaryState rest = BoundaryState::rest(7);
  for (auto _ : state) benchmark::DoNotOptimize(min_stretch_spline(Q, weights, rest, knots));
  state.SetComplexityN(n);
}
BENCHMARK(BM_MinStretch)->RangeMultiplier(2)->Range(8, 256)->Complexity(benchmark::oN)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MinStretch)->Name("BM_MinStretch7DofFiftyWaypoints")->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_Interpolate(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const WaypointMatrix Q = random_walk(n, 7, 2);
  const KnotSequence knots(std::vector<double>(static_cast<std::size_t>(n - 1), 0.05));
  const BoundaryState rest = BoundaryState::rest(7);
  for (auto _ : state) benchmark::DoNotOptimize(interpolating_spline(Q, rest, knots));
}
BENCHMARK(BM_Interpolate)->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_BandedSolve(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  BandMatrix m(n, 2, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - 2); j <= std::min(n - 1, i + 2); ++j) m.at(i, j) = d(rng);
    m.at(i, i) += 6.0;
  }
  const Eigen::MatrixXd rhs = Eigen::MatrixXd::Random(n, 7);
  for (auto _ : state) benchmark::DoNotOptimize(solve_banded(m, rhs));
  state.SetComplexityN(n);
}
BENCHMARK(BM_BandedSolve)->RangeMultiplier(4)->Range(16, 4096)->Complexity(benchmark::oN);

}  // namespace

BENCHMARK_MAIN();
