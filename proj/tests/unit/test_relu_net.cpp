#include "deepprae/encoding.hpp"
#include "deepprae/errors.hpp"
#include "deepprae/relu_net.hpp"

#include "../support/gradcheck.hpp"
#include "doctest.h"

#include <random>

using namespace deepprae;

namespace {

std::vector<LabeledSample> disc_data(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::vector<LabeledSample> out;
  for (int i = 0; i < n; ++i) {
    Vec x(2);
    x << u(rng), u(rng);
    out.push_back({x, x.sum() > 5.0 ? 1 : 0});
  }
  return out;
}

MlpParams random_params(const MlpSpec& spec, std::uint64_t seed) {
  MlpParams p = zero_params(spec);
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 0.7);
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = nd(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = nd(rng);
  }
  for (int j = 0; j < spec.input_dim; ++j) {
    p.input_scale[j] = 0.5 + 0.1 * j;
    p.input_shift[j] = -0.3 * j;
  }
  return p;
}

}  // namespace

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(zero_params(MlpSpec{2, {}}), InvalidArgument);
  CHECK_THROWS_AS(zero_params(MlpSpec{0, {4}}), InvalidArgument);
  CHECK(MlpSpec::default_for(5).hidden == std::vector<int>{32});
  CHECK(MlpSpec::default_for(15).hidden == std::vector<int>{64});
  auto d = disc_data(20, 1);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train(d, MlpSpec{2, {4}}, bad), InvalidArgument);
}

TEST_CASE("zero network has zero logit") {
  const auto p = zero_params(MlpSpec{3, {5, 4}});
  CHECK(logit(p, Vec::Ones(3)) == 0.0);
  CHECK(p.neuron_count() == 9);
}

TEST_CASE("single-class data is rejected") {
  auto d = disc_data(50, 2);
  for (auto& s : d) s.label = 0;
  CHECK_THROWS_AS(train(d, MlpSpec{2, {4}}, {}), SingleClassData);
}

TEST_CASE("backprop matches finite differences") {
  const auto d = disc_data(5, 3);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto p = random_params(MlpSpec{2, {8}}, seed);
    const auto gc = testsupport::gradient_check(p, d, 1.7);
    CHECK(gc.max_rel_error <= 1e-4);
    CHECK(gc.parameters == 8 * 2 + 8 + 8 + 1);
  }
  const auto deep = random_params(MlpSpec{2, {6, 5}}, 4);
  CHECK(testsupport::gradient_check(deep, d, 0.5).max_rel_error <= 1e-4);
}

TEST_CASE("training is deterministic and learns a halfplane") {
  const auto d = disc_data(400, 4);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 9;
  const auto a = train(d, MlpSpec{2, {8}}, cfg);
  const auto b = train(d, MlpSpec{2, {8}}, cfg);
  CHECK(save_params(a) == save_params(b));
  int correct = 0;
  for (const auto& s : d) correct += (logit(a, s.point) >= 0.0) == (s.label == 1);
  CHECK(correct >= 380);
}

TEST_CASE("interval bounds enclose the network") {
  const auto p = random_params(MlpSpec{2, {6, 4}}, 5);
  const Box box = Box::cube(2, -1.0, 2.0);
  const auto iv = interval_bounds(p, box);
  Rng rng(1);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    Vec x(2);
    x << u(rng), u(rng);
    const auto pre = preactivations(p, x);
    REQUIRE(pre.size() == iv.size());
    for (std::size_t l = 0; l < pre.size(); ++l) {
      CHECK((pre[l].array() >= iv[l].lower.array() - 1e-9).all());
      CHECK((pre[l].array() <= iv[l].upper.array() + 1e-9).all());
    }
  }
}

TEST_CASE("MIP encoding reproduces the logit") {
  const auto p = random_params(MlpSpec{2, {6, 3}}, 6);
  const Box box = Box::cube(2, 0.0, 3.0);
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    Vec x(2);
    x << u(rng), u(rng);
    milp::MilpProblem prob;
    const auto enc = milp::encode_relu_network(p, box, prob);
    for (int j = 0; j < 2; ++j) prob.set_bounds(enc.input_vars[j], x[j], x[j]);
    prob.set_linear_objective({{enc.output_var, 1.0}}, milp::Sense::Min);
    const auto sol = milp::solve(prob);
    REQUIRE(sol.status == milp::SolveStatus::Optimal);
    CHECK(std::abs(sol.values[enc.output_var] - logit(p, x)) <= 1e-6);
  }
}

TEST_CASE("model file round trip and corruption") {
  const auto p = random_params(MlpSpec{3, {4}}, 7);
  const auto bytes = save_params(p);
  CHECK(bytes.substr(0, 8) == "DPRAEMLP");
  const auto back = load_params(bytes);
  CHECK(save_params(back) == bytes);
  CHECK_THROWS_AS(load_params(bytes.substr(0, bytes.size() - 3)), TruncatedStream);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(load_params(bad), FormatVersionMismatch);
  std::string v2 = bytes;
  v2[8] = 2;
  CHECK_THROWS_AS(load_params(v2), FormatVersionMismatch);
}
