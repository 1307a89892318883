#include "deepprae/baselines.hpp"
#include "deepprae/errors.hpp"
#include "deepprae/estimators.hpp"

#include "../support/oracles.hpp"
#include "doctest.h"
#include "json.hpp"

#include <cmath>
#include <vector>

using namespace deepprae;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

const Family& std_normal() {
  static const Family f = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  return f;
}

bool peril(const Vec& x, double gamma, double k) { return x[0] >= gamma || x[0] <= -k * gamma; }

}  // namespace

TEST_CASE("relative error identity") {
  const std::vector<double> z{0.0, 1.0, 3.0};
  const auto r = summarize(z, BoundKind::Point);
  const double m1 = 4.0 / 3.0, m2 = 10.0 / 3.0;
  CHECK(r.estimate == doctest::Approx(m1).epsilon(1e-15));
  CHECK(r.second_moment == doctest::Approx(m2).epsilon(1e-15));
  CHECK(r.empirical_re == doctest::Approx((m2 - m1 * m1) / (m1 * m1)).epsilon(1e-14));
  CHECK(r.hits == 2);
  CHECK(r.required_n() == doctest::Approx(r.empirical_re / (0.05 * 0.01)));
}

TEST_CASE("zero hits") {
  const std::vector<double> z(10, 0.0);
  const auto r = summarize(z, BoundKind::Upper);
  CHECK(r.estimate == 0.0);
  CHECK(r.zero_hit);
  CHECK_FALSE(r.certified);
  CHECK(r.empirical_re == 0.0);
}

TEST_CASE("report invariants on random outputs") {
  Rng rng(3);
  std::exponential_distribution<double> e(2.0);
  std::vector<double> z(1000);
  for (auto& v : z) v = e(rng);
  const auto r = summarize(z, BoundKind::Point);
  CHECK(r.estimate >= 0.0);
  CHECK(r.empirical_re >= 0.0);
  CHECK(r.second_moment >= r.estimate * r.estimate - 1e-15);
}

TEST_CASE("single anchor on the right tail") {
  const auto prop = MixtureProposal::uniform(std_normal(), {tilt_param(std_normal(), v1(3.0))});
  const auto r = mixture_is([](const Vec& x) { return x[0] >= 3.0; }, prop, 10000, 1, 1, BoundKind::Upper);
  CHECK(std::abs(r.estimate / oracle::normal_tail(3.0) - 1.0) <= 0.05);
  CHECK(r.direction == BoundKind::Upper);
}

TEST_CASE("whole space integrates to one") {
  const auto prop = MixtureProposal::uniform(std_normal(), {tilt_param(std_normal(), v1(2.0))});
  const auto r = mixture_is([](const Vec&) { return true; }, prop, 20000, 2);
  CHECK(std::abs(r.estimate - 1.0) <= 3.0 * r.standard_error());
}

TEST_CASE("two anchors recover the two-sided tail") {
  const auto prop = MixtureProposal::uniform(std_normal(),
                                             {tilt_param(std_normal(), v1(3.0)), tilt_param(std_normal(), v1(-1.5))});
  const double truth = oracle::normal_tail(3.0) + oracle::normal_tail(1.5);
  CHECK(truth == doctest::Approx(6.8157e-2).epsilon(1e-4));
  const auto r = mixture_is([](const Vec& x) { return peril(x, 3.0, 0.5); }, prop, 10000, 4);
  CHECK(std::abs(r.estimate / truth - 1.0) <= 0.05);
}

TEST_CASE("mixture IS is reproducible per (seed, workers)") {
  const auto prop = MixtureProposal::uniform(std_normal(), {tilt_param(std_normal(), v1(3.0))});
  auto in = [](const Vec& x) { return x[0] >= 3.0; };
  const auto a = mixture_is(in, prop, 5000, 9, 3);
  const auto b = mixture_is(in, prop, 5000, 9, 3);
  CHECK(a.estimate == b.estimate);
  CHECK(a.second_moment == b.second_moment);
  const auto c = mixture_is(in, prop, 5000, 10, 3);
  CHECK(a.estimate != c.estimate);
}

TEST_CASE("single-point IS misses the left branch") {
  const double gamma = 3.0, k = 0.5;
  const double lo = oracle::normal_tail(gamma);
  // Per-run second moment over mean squared for the right branch alone.
  const double ratio = std::exp(gamma * gamma) * oracle::normal_tail(2.0 * gamma) / (lo * lo);
  int close = 0, re_ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto r = peril_single_point_is(gamma, k, 10000, rng);
    close += std::abs(r.estimate / lo - 1.0) <= 0.1;
    re_ok += r.empirical_re <= 2.0 * ratio;
  }
  // A left-branch hit (probability about 3% per run of 10^4) blows up one seed's RE.
  CHECK(close >= 90);
  CHECK(re_ok >= 90);
}

TEST_CASE("single-point IS is nearly unbiased when the left branch is negligible") {
  Rng rng(5);
  const auto r = peril_single_point_is(3.0, 2.9, 10000, rng);
  const double truth = oracle::normal_tail(3.0) + oracle::normal_tail(8.7);
  CHECK(std::abs(r.estimate / truth - 1.0) <= 0.1);
  CHECK_THROWS(peril_single_point_is(3.0, 3.5, 10, rng));
}

TEST_CASE("naive MC fraction") {
  Rng rng(1);
  const auto r = naive_mc([](const Vec& x) { return x[0] >= 1.0; }, std_normal(), 100000, rng);
  CHECK(std::abs(r.estimate - oracle::normal_tail(1.0)) <= 3.0 * r.standard_error());
}

TEST_CASE("cross-entropy on a single tail") {
  Rng rng(2);
  const auto res = cross_entropy([](const Vec& x) { return x[0]; }, 3.0, GaussianFamily::isotropic(Vec::Zero(1), 1.0),
                                 CeConfig{}, rng);
  CHECK(std::abs(res.report.estimate / oracle::normal_tail(3.0) - 1.0) <= 0.1);
  CHECK(res.reached);
  CHECK_FALSE(res.report.certified);
}

TEST_CASE("cross-entropy under-estimates the two-sided tail") {
  const double truth = oracle::normal_tail(3.0) + oracle::normal_tail(1.5);
  int right_tail = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto res = cross_entropy([](const Vec& x) { return x[0]; }, 3.0,
                                   GaussianFamily::isotropic(Vec::Zero(1), 1.0), CeConfig{}, rng, false,
                                   [](const Vec& x) { return peril(x, 3.0, 0.5); });
    CHECK(res.report.estimate < 0.1 * truth);
    right_tail += std::abs(res.report.estimate / oracle::normal_tail(3.0) - 1.0) <= 0.2;
  }
  // The fitted proposal is narrower than the tail, so an occasional heavy weight inflates one run.
  CHECK(right_tail >= 8);
}

TEST_CASE("cross-entropy with a large elite fraction stops fast") {
  Rng rng(4);
  CeConfig cfg;
  cfg.rho = 0.99;
  const auto res = cross_entropy([](const Vec& x) { return x[0]; }, -3.0, GaussianFamily::isotropic(Vec::Zero(1), 1.0),
                                 cfg, rng);
  CHECK(res.levels.size() <= 2);
}

TEST_CASE("cross-entropy with a mixture family") {
  Rng rng(6);
  CeConfig cfg;
  cfg.kind = CeKind::Gmm;
  cfg.components = 2;
  const auto res = cross_entropy([](const Vec& x) { return x[0]; }, 3.0, GaussianFamily::isotropic(Vec::Zero(1), 1.0),
                                 cfg, rng);
  CHECK(std::abs(res.report.estimate / oracle::normal_tail(3.0) - 1.0) <= 0.15);
  CeConfig bad;
  bad.rho = 1.5;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("multilevel splitting on a single tail") {
  Rng rng(7);
  const auto res = ams([](const Vec& x) { return x[0]; }, 2.0, GaussianFamily::isotropic(Vec::Zero(1), 1.0),
                       AmsConfig{}, rng);
  CHECK(std::abs(res.report.estimate / oracle::normal_tail(2.0) - 1.0) <= 0.15);
  CHECK_FALSE(res.report.certified);
}

TEST_CASE("multilevel splitting below every score is naive MC") {
  Rng rng(8);
  AmsConfig cfg;
  cfg.n_particles = 200;
  const auto res = ams([](const Vec& x) { return x[0]; }, -100.0, GaussianFamily::isotropic(Vec::Zero(1), 1.0), cfg, rng);
  CHECK(res.report.estimate == 1.0);
  CHECK(res.levels.empty());
  AmsConfig bad;
  bad.n_particles = 5;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("report JSON carries the certificate fields") {
  const std::vector<double> z{0.0, 2.0};
  auto r = summarize(z, BoundKind::Lower);
  r.certified = true;
  const auto j = report_to_json(r);
  const auto parsed = nlohmann::json::parse(j);
  CHECK(parsed.at("direction") == "lower");
  CHECK(parsed.at("certified") == true);
  CHECK(parsed.at("estimate").get<double>() == doctest::Approx(1.0));
}
