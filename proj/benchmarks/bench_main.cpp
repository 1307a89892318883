#include "deepprae/encoding.hpp"
#include "deepprae/estimators.hpp"
#include "deepprae/milp.hpp"
#include "deepprae/monotone_hull.hpp"
#include "deepprae/relu_net.hpp"
#include "deepprae/scenarios.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace deepprae;

namespace {

std::vector<LabeledSample> uniform_points(int d, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<LabeledSample> out;
  for (int i = 0; i < n; ++i) {
    Vec x(d);
    for (int j = 0; j < d; ++j) x[j] = u(rng);
    out.push_back({x, x.sum() > 0.6 * d ? 1 : 0});
  }
  return out;
}

MlpParams random_net(int d, int width, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  MlpParams p = zero_params(MlpSpec{d, {width}});
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = nd(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = nd(rng);
  }
  return p;
}

void BM_BuildLowerHull(benchmark::State& state) {
  const auto pts = uniform_points(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(build_hull(pts, HullKind::Lower));
}
BENCHMARK(BM_BuildLowerHull)->Args({2, 10000})->Args({5, 2000});

void BM_LogitMaxMilp(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const auto net = random_net(2, width, 7);
  for (auto _ : state) {
    milp::MilpProblem p;
    const auto enc = milp::encode_relu_network(net, Box::cube(2, -2.0, 2.0), p);
    p.set_linear_objective({{enc.output_var, 1.0}}, milp::Sense::Max);
    benchmark::DoNotOptimize(milp::solve(p));
  }
}
BENCHMARK(BM_LogitMaxMilp)->Arg(8)->Arg(15);

void BM_TrainEpoch(benchmark::State& state) {
  const auto pts = uniform_points(2, 2000, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(pts, MlpSpec{2, {15}}, cfg));
}
BENCHMARK(BM_TrainEpoch);

void BM_MixtureIs(benchmark::State& state) {
  const Family f = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  const auto prop = MixtureProposal::uniform(f, {tilt_param(f, Vec::Constant(1, 3.0)), tilt_param(f, Vec::Constant(1, -1.5))});
  auto in = [](const Vec& x) { return x[0] >= 3.0 || x[0] <= -1.5; };
  for (auto _ : state) benchmark::DoNotOptimize(mixture_is(in, prop, 10000, 5));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_MixtureIs);

void BM_IdmSimulate(benchmark::State& state) {
  const auto params = IdmParams::for_gamma(1.0);
  const Vec u = Vec::Constant(params.epochs(), 9.0);
  for (auto _ : state) benchmark::DoNotOptimize(idm_simulate(u, params));
}
BENCHMARK(BM_IdmSimulate);

}  // namespace

BENCHMARK_MAIN();
