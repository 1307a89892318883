#include "deepprae/errors.hpp"
#include "deepprae/monotone_hull.hpp"

#include "../support/staircase.hpp"
#include "doctest.h"

#include <random>

using namespace deepprae;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::vector<LabeledSample> random_samples(int n, int d, Rng& rng, int label) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<LabeledSample> out;
  for (int i = 0; i < n; ++i) {
    Vec x(d);
    for (int j = 0; j < d; ++j) x[j] = u(rng);
    out.push_back({x, label});
  }
  return out;
}

}  // namespace

// Exact up to the rounding of x - offset + offset.
TEST_CASE("orientation inverse round trip") {
  Orientation o{v2(-1.0, 1.0), v2(3.0, -2.5)};
  Rng rng(1);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 100; ++i) {
    const Vec x = v2(nd(rng), nd(rng));
    CHECK((o.inverse(o.apply(x)) - x).lpNorm<Eigen::Infinity>() <= 4e-16 * (1.0 + o.offset.lpNorm<Eigen::Infinity>()));
    CHECK(o.inverse(o.apply(Vec::Zero(2))) == Vec::Zero(2));
  }
}

TEST_CASE("lower hull basics") {
  std::vector<LabeledSample> s{{v2(1.0, 3.0), 0}, {v2(2.0, 2.0), 0}, {v2(3.0, 1.0), 0}, {v2(1.0, 1.0), 0},
                               {v2(5.0, 5.0), 1}};
  const auto h = build_hull(s, HullKind::Lower);
  CHECK(h.size() == 3);  // (1,1) is dominated; the label-1 point is ignored
  CHECK(h.contains(Vec::Zero(2)));
  CHECK(h.contains(v2(2.0, 2.0)));
  CHECK_FALSE(h.contains(v2(2.5, 2.5)));
  CHECK(h.margin(v2(2.5, 2.5)) == doctest::Approx(0.5));
  CHECK(h.margin(v2(0.5, 0.5)) < 0.0);
}

TEST_CASE("upper hull basics") {
  std::vector<LabeledSample> s{{v2(1.0, 3.0), 1}, {v2(3.0, 1.0), 1}, {v2(4.0, 4.0), 1}};
  const auto h = build_hull(s, HullKind::Upper);
  CHECK(h.size() == 2);
  CHECK(h.contains(v2(1.0, 3.0)));
  CHECK(h.contains(v2(9.0, 9.0)));
  CHECK_FALSE(h.contains(v2(2.0, 2.0)));
}

TEST_CASE("ties count as domination") {
  std::vector<Vec> pts{v2(1.0, 1.0), v2(1.0, 1.0), v2(1.0, 0.5)};
  CHECK(pareto_frontier(pts, HullKind::Lower).rows() == 1);
  CHECK(pareto_frontier(pts, HullKind::Upper).rows() == 1);
}

TEST_CASE("empty label class is rejected") {
  std::vector<LabeledSample> s{{v2(1.0, 1.0), 1}};
  CHECK_THROWS_AS(build_hull(s, HullKind::Lower), EmptyLabelClass);
  CHECK_THROWS_AS(build_hull(std::vector<LabeledSample>{{v2(1.0, 1.0), 0}}, HullKind::Upper), EmptyLabelClass);
}

TEST_CASE("downward and upward closure") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int d : {2, 3, 5}) {
    const auto lower = build_hull(random_samples(200, d, rng, 0), HullKind::Lower);
    const auto upper = build_hull(random_samples(200, d, rng, 1), HullKind::Upper);
    for (int i = 0; i < 1000; ++i) {
      Vec x(d), y(d), z(d);
      for (int j = 0; j < d; ++j) {
        x[j] = 10.0 * u(rng);
        y[j] = x[j] * u(rng);             // 0 <= y <= x
        z[j] = x[j] + 5.0 * u(rng);       // z >= x
      }
      if (lower.contains(x)) CHECK(lower.contains(y));
      if (upper.contains(x)) CHECK(upper.contains(z));
    }
  }
}

TEST_CASE("hull of the non-rare samples never contains a rare sample") {
  Rng rng(5);
  for (int d : {2, 3, 5}) {
    const auto stair = testsupport::Staircase::random(d, 8, 10.0, rng);
    auto s = random_samples(3000, d, rng, 0);
    for (auto& x : s) x.label = stair.rare(x.point) ? 1 : 0;
    const auto h = build_hull(s, HullKind::Lower);
    int bad = 0;
    for (const auto& x : s)
      if (x.label == 1 && h.contains(x.point)) ++bad;
    CHECK(bad == 0);
  }
}

TEST_CASE("frontier is minimal") {
  Rng rng(9);
  const auto h = build_hull(random_samples(300, 3, rng, 0), HullKind::Lower);
  for (std::size_t i = 0; i < h.size(); ++i) {
    // The frontier point itself lies in its own rectangle and in no other.
    Mat rest(h.size() - 1, 3);
    for (std::size_t k = 0, r = 0; k < h.size(); ++k)
      if (k != i) rest.row(r++) = h.frontier().row(k);
    CHECK_FALSE(MonotoneHull(HullKind::Lower, rest).contains(h.point(i)));
  }
}

TEST_CASE("thinning keeps a subset of the frontier") {
  Rng rng(2);
  const auto s = random_samples(500, 3, rng, 0);
  const auto full = build_hull(s, HullKind::Lower);
  const auto thin = build_hull(s, HullKind::Lower, HullOptions{10, std::nullopt});
  CHECK(thin.size() == 10);
  for (std::size_t i = 0; i < thin.size(); ++i) CHECK(full.contains(thin.point(i)));
  CHECK_THROWS_AS(build_hull(std::vector<LabeledSample>(s.begin(), s.end()), HullKind::Upper, HullOptions{1, std::nullopt}),
                  EmptyLabelClass);
}

TEST_CASE("hull CSV round trip") {
  Rng rng(4);
  const auto h = build_hull(random_samples(100, 2, rng, 0), HullKind::Lower);
  const auto back = hull_from_csv(hull_to_csv(h), HullKind::Lower);
  CHECK(back.size() == h.size());
  CHECK((back.frontier() - h.frontier()).lpNorm<Eigen::Infinity>() == 0.0);
}
