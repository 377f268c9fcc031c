// Serial reference against the OpenMP path for the sample-parallel kernels.
// Both paths return bit-identical results; only wall time differs.

#include <benchmark/benchmark.h>

#include "sflow/imaging.hpp"
#include "sflow/ldp_lab.hpp"

using namespace sflow;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::kSerial : Execution::kParallel;
}

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

BasisFamily bumps(int dim) {
  PointSet c;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < (dim == 2 ? 3 : 1); ++j) {
      c.push_back(dim == 2 ? make_vec({(i + 0.5) / 3, (j + 0.5) / 3}) : make_vec({(i + 0.5) / 3}));
    }
  }
  return make_gaussian_bump_basis(dim, c, 0.2, 1.0, Box::unit(dim));
}

void BM_EndpointSamples(benchmark::State& state) {
  const BasisFamily b = bumps(2);
  const auto F = make_quadratic_functional({0.5, 0.5, 0.2, 0.8}, 1.0);
  const PointSet x{make_vec({0.4, 0.4}), make_vec({0.6, 0.7})};
  for (auto _ : state) {
    auto v = sample_endpoint_functional(b, 0.1, 2000, *F, x, 1.0, 0.01, 1, mode(state));
    benchmark::DoNotOptimize(v.data());
  }
  state.SetItemsProcessed(state.iterations() * 2000);
  label(state);
}
BENCHMARK(BM_EndpointSamples)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_LaplaceTranslation(benchmark::State& state) {
  const BasisFamily b(1, 1.0, {std::make_shared<ConstantField>(make_vec({1.0}))});
  const auto F = make_quadratic_functional({1.0}, 1.0);
  for (auto _ : state) {
    auto e = laplace_estimate(b, 0.05, 20000, *F, {make_vec({0.0})}, 1.0, 0.01, 3, mode(state));
    benchmark::DoNotOptimize(e.estimate);
  }
  state.SetItemsProcessed(state.iterations() * 20000);
  label(state);
}
BENCHMARK(BM_LaplaceTranslation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_PosteriorCheck(benchmark::State& state) {
  MatchProblem p{make_affine_template(0.0, make_vec({5.0})), CellPartition::uniform({4}), {},
                 make_sine_basis(Box::unit(1), 1, 2.0), 0.0, 20};
  const double c[] = {0.5};
  const ControlPath u = ControlPath::constant(c, 20, 0.05);
  p.data = synthesize_data(p, &u, 0.0, 7);
  const auto F = make_identity_distance_functional(1.0);
  PosteriorOptions o;
  o.match.multistart = 1;
  for (auto _ : state) {
    auto r = posterior_laplace_check(p, *F, {0.2, 0.1, 0.05}, 2000, 7, o, mode(state));
    benchmark::DoNotOptimize(r.rows.data());
  }
  label(state);
}
BENCHMARK(BM_PosteriorCheck)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
