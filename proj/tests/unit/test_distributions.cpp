#include "deepprae/distributions.hpp"
#include "deepprae/errors.hpp"
#include "deepprae/estimators.hpp"

#include "../support/oracles.hpp"
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

using namespace deepprae;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

GmmFamily two_bump() {
  Mat c1(2, 2), c2(2, 2);
  c1 << 1.0, 0.3, 0.3, 0.5;
  c2 << 0.4, 0.0, 0.0, 0.8;
  return GmmFamily({GaussianFamily(v2(0.0, 0.0), c1), GaussianFamily(v2(2.0, -1.0), c2)}, v2(0.6, 0.4));
}

}  // namespace

TEST_CASE("log_sum_exp handles extremes") {
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> a{1000.0, 1000.0};
  CHECK(log_sum_exp(a) == doctest::Approx(1000.0 + std::log(2.0)));
  std::vector<double> b{ninf, ninf};
  CHECK(log_sum_exp(b) == ninf);
  std::vector<double> c{ninf, -3.0};
  CHECK(log_sum_exp(c) == doctest::Approx(-3.0));
}

TEST_CASE("untilted component gives unit likelihood ratio") {
  const Family f = GaussianFamily::isotropic(Vec::Zero(2), 1.0);
  const auto c = make_tilt_component(f, Vec::Zero(2), Vec::Zero(2));
  const auto prop = MixtureProposal::uniform(f, {c});
  for (double x : {-5.0, 0.0, 3.0}) CHECK(prop.likelihood_ratio(v2(x, -x)) == doctest::Approx(1.0));
}

TEST_CASE("single anchor at 3 has ratio exp(-4.5) at x = 3") {
  const Family f = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  const auto prop = MixtureProposal::uniform(f, {tilt_param(f, v1(3.0))});
  CHECK(prop.likelihood_ratio(v1(3.0)) == doctest::Approx(std::exp(-4.5)).epsilon(1e-12));
  CHECK(prop.likelihood_ratio(v1(3.0)) == doctest::Approx(0.011109).epsilon(1e-4));
}

TEST_CASE("tilt consistency and rate duality") {
  Mat cov(3, 3);
  cov << 2.0, 0.5, 0.1, 0.5, 1.0, -0.2, 0.1, -0.2, 0.7;
  Vec mean(3);
  mean << 1.0, -2.0, 0.5;
  const std::vector<Family> families = {GaussianFamily(mean, cov), GammaFamily(2.5, 1.5), two_bump()};
  Rng rng(7);
  std::normal_distribution<double> nd;
  for (const auto& f : families) {
    const int d = dim(f);
    for (int trial = 0; trial < 20; ++trial) {
      Vec a = family_mean(f);
      for (int j = 0; j < d; ++j) a[j] += std::holds_alternative<GammaFamily>(f) ? 0.8 * trial / 20.0 + 0.1 : nd(rng);
      const auto c = tilt_param(f, a);
      CHECK((cgf_gradient(f, c.tilt) - a).lpNorm<Eigen::Infinity>() <= 1e-8);
      CHECK((cgf_gradient_fd(f, c.tilt) - cgf_gradient(f, c.tilt)).lpNorm<Eigen::Infinity>() <= 1e-4);
      CHECK(rate(f, a) == doctest::Approx(c.tilt.dot(a) - cgf(f, c.tilt)).epsilon(1e-8).scale(1.0));
      CHECK(rate(f, a) >= -1e-10);
    }
    CHECK(std::abs(rate(f, cgf_gradient(f, Vec::Zero(d)))) <= 1e-10);
  }
}

TEST_CASE("make_tilt_component rejects inconsistent anchors") {
  const Family f = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  CHECK_THROWS_AS(make_tilt_component(f, v1(3.0), v1(2.0)), ConvergenceError);
}

TEST_CASE("likelihood ratio stays finite far from the anchors") {
  const Family f = GaussianFamily::isotropic(Vec::Zero(2), 1.0);
  const auto prop = MixtureProposal::uniform(f, {tilt_param(f, v2(3.0, 0.0)), tilt_param(f, v2(0.0, -4.0))});
  for (double x : {1e6, -1e6, 0.0, 123.0}) {
    for (double y : {1e6, -1e6, 7.0}) {
      const double l = prop.likelihood_ratio(v2(x, y));
      CHECK(std::isfinite(l));
      CHECK(l >= 0.0);
    }
  }
}

TEST_CASE("parameter invariants are enforced") {
  CHECK_THROWS(GammaFamily(0.0, 1.0));
  CHECK_THROWS(GammaFamily(1.0, -1.0));
  const auto g = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  CHECK_THROWS(GmmFamily({g, g}, v2(0.5, 0.6)));
  CHECK_THROWS(GmmFamily({g, GaussianFamily::isotropic(Vec::Zero(2), 1.0)}, v2(0.5, 0.5)));
  const Family f = g;
  CHECK_THROWS(MixtureProposal(f, {tilt_param(f, v1(1.0))}, v2(0.5, 0.5)));
  CHECK_THROWS(MixtureProposal(f, {}, Vec(0)));
}

TEST_CASE("change of measure on [1, inf) agrees with the normal tail") {
  const Family f = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  const auto prop = MixtureProposal::uniform(f, {tilt_param(f, v1(1.0))});
  const auto r = mixture_is([](const Vec& x) { return x[0] >= 1.0; }, prop, 200000, 11);
  CHECK(std::abs(r.estimate - oracle::normal_tail(1.0)) <= 3.0 * r.standard_error());
}

TEST_CASE("gamma tilt sampler matches the tail") {
  const Family f = GammaFamily(2.0, 1.0);
  const auto prop = MixtureProposal::uniform(f, {tilt_param(f, v1(8.0))});
  const auto r = mixture_is([](const Vec& x) { return x[0] >= 8.0; }, prop, 200000, 5);
  CHECK(std::abs(r.estimate - oracle::gamma_tail(8.0, 2.0, 1.0)) <= 3.0 * r.standard_error());
}

TEST_CASE("gmm tilted sampling is unbiased") {
  const Family f = two_bump();
  const auto prop = MixtureProposal::uniform(f, {tilt_param(f, v2(3.0, 1.0))});
  // Whole space: the ratio integrates to one.
  const auto r = mixture_is([](const Vec&) { return true; }, prop, 100000, 3);
  CHECK(std::abs(r.estimate - 1.0) <= 3.0 * r.standard_error());
}

TEST_CASE("family JSON round trip") {
  Mat cov(2, 2);
  cov << 1.0, 0.25, 0.25, 2.0;
  const std::vector<Family> fs = {GaussianFamily(v2(1.0, 2.0), cov), GammaFamily(3.0, 0.5), two_bump()};
  for (const auto& f : fs) {
    const auto text = family_to_json(f);
    const auto back = family_from_json(text);
    CHECK(family_to_json(back) == text);
  }
  CHECK_THROWS_AS(family_from_json("{\"kind\": \"laplace\"}"), ConfigParse);
}
