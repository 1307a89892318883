#include "deepprae/errors.hpp"
#include "deepprae/set_learning.hpp"

#include "../support/staircase.hpp"
#include "doctest.h"

#include <random>

using namespace deepprae;

namespace {

// g(x) = relu(x) + shift on [0, M]: the identity there, shifted.
MlpParams linear_1d(double shift) {
  MlpParams p = zero_params(MlpSpec{1, {1}});
  p.layers[0].weight(0, 0) = 1.0;
  p.layers[1].weight(0, 0) = 1.0;
  p.layers[1].bias[0] = shift;
  return p;
}

MonotoneHull hull_1d(HullKind kind, double at) { return MonotoneHull(kind, Mat::Constant(1, 1, at)); }

struct Trained {
  std::vector<LabeledSample> samples;
  MlpParams params;
  MonotoneHull lower{HullKind::Lower, Mat::Zero(1, 2)};
  MonotoneHull upper{HullKind::Upper, Mat::Zero(1, 2)};
  testsupport::Staircase stair;
};

Trained trained_2d(std::uint64_t seed) {
  Rng rng(seed);
  Trained t;
  t.stair = testsupport::Staircase::random(2, 4, 10.0, rng);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int i = 0; i < 600; ++i) {
    Vec x(2);
    x << u(rng), u(rng);
    t.samples.push_back({x, t.stair.rare(x) ? 1 : 0});
  }
  TrainConfig cfg;
  cfg.epochs = 80;
  cfg.seed = seed;
  t.params = train(t.samples, MlpSpec{2, {8}}, cfg);
  t.lower = build_hull(t.samples, HullKind::Lower);
  t.upper = build_hull(t.samples, HullKind::Upper);
  return t;
}

}  // namespace

TEST_CASE("containment on a 1D linear network") {
  const Box box = Box::cube(1, 0.0, 1.0);
  const auto g = linear_1d(0.0);
  const auto h = hull_1d(HullKind::Lower, 0.5);
  const auto no = containment_check(g, 0.7, h, box);
  CHECK_FALSE(no.contained);
  REQUIRE(no.witness);
  CHECK((*no.witness)[0] > 0.5);
  CHECK((*no.witness)[0] <= 0.7 + 1e-9);
  CHECK(containment_check(g, 0.4, h, box).contained);
  CHECK(containment_check(g, -1.0, h, box).contained);  // empty sublevel set
  // A hull anchored at the box corner is the whole box.
  CHECK(containment_check(g, 5.0, hull_1d(HullKind::Lower, 1.0), box).contained);
}

TEST_CASE("outer calibration of a perfect classifier") {
  const Box box = Box::cube(1, 0.0, 1.0);
  const auto set = tune_kappa_outer(linear_1d(-0.5), hull_1d(HullKind::Lower, 0.5), box, Orientation::identity(1));
  CHECK(set.verified);
  CHECK(set.kappa_hat <= 0.0);
  CHECK(set.kappa_hat >= -1e-4);
}

TEST_CASE("outer calibration with a hull covering the box") {
  const Box box = Box::cube(1, 0.0, 1.0);
  const auto g = linear_1d(0.0);
  const auto set = tune_kappa_outer(g, hull_1d(HullKind::Lower, 1.0), box, Orientation::identity(1));
  const auto range = logit_range(g, box);
  CHECK(set.kappa_hat == doctest::Approx(range.hi));
}

TEST_CASE("inner calibration of a perfect classifier") {
  const Box box = Box::cube(1, 0.0, 1.0);
  const auto set = tune_kappa_inner(linear_1d(-0.5), hull_1d(HullKind::Upper, 0.5), box, Orientation::identity(1));
  CHECK(set.verified);
  CHECK(set.kappa_hat >= 0.0);
  CHECK(set.kappa_hat <= 1e-4);
}

TEST_CASE("learned set membership outside the box") {
  const Box box = Box::cube(1, 0.0, 1.0);
  const auto outer = tune_kappa_outer(linear_1d(-0.5), hull_1d(HullKind::Lower, 0.5), box, Orientation::identity(1));
  CHECK(outer.contains(Vec::Constant(1, 2.0)));
  CHECK_FALSE(outer.contains(Vec::Constant(1, -1.0)));
  const auto inner = tune_kappa_inner(linear_1d(-0.5), hull_1d(HullKind::Upper, 0.5), box, Orientation::identity(1));
  CHECK(inner.contains(Vec::Constant(1, 2.0)));
  CHECK_FALSE(inner.contains(Vec::Constant(1, -1.0)));
}

TEST_CASE("trained 2D calibration: zero false negatives, sandwich, nested diagnostics") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto t = trained_2d(seed);
    const Box box = Box::cube(2, 0.0, 10.0);
    const auto outer = tune_kappa_outer(t.params, t.lower, box, Orientation::identity(2), {}, t.samples);
    const auto inner = tune_kappa_inner(t.params, t.upper, box, Orientation::identity(2), {}, t.samples);
    CHECK(outer.verified);
    CHECK(inner.verified);
    int missed = 0;
    for (const auto& s : t.samples)
      if (s.label == 1 && logit(t.params, s.point) < outer.kappa_hat) ++missed;
    CHECK(missed == 0);
    CHECK(inner.kappa_hat >= outer.kappa_hat);
    // Every point of the inner set is rare; every rare sample is in the outer set.
    Rng rng(seed + 10);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 2000; ++i) {
      Vec x(2);
      x << u(rng), u(rng);
      if (inner.contains(x)) CHECK(t.upper.contains(x));
      if (!t.lower.contains(x)) CHECK(outer.contains(x));
    }

    auto looser = outer;
    looser.kappa_hat -= 0.5;
    auto sampler = [](Rng& r) {
      std::uniform_real_distribution<double> v(0.0, 10.0);
      Vec x(2);
      x << v(r), v(r);
      return x;
    };
    auto oracle = [&](const Vec& x) { return t.stair.rare(x); };
    Rng r1(77), r2(77);
    const auto tight = conservativeness_diagnostic(outer, oracle, sampler, 5000, r1);
    const auto loose = conservativeness_diagnostic(looser, oracle, sampler, 5000, r2);
    CHECK(tight.rate <= loose.rate);
  }
}

TEST_CASE("golden outer threshold for a seeded 2D run") {
  const auto t = trained_2d(1);
  const auto outer = tune_kappa_outer(t.params, t.lower, Box::cube(2, 0.0, 10.0), Orientation::identity(2), {}, t.samples);
  // Tightened below the 0-logit (probability 1/2) level.
  CHECK(outer.kappa_hat < 0.0);
}
