#include "deepprae/dominating_points.hpp"
#include "deepprae/errors.hpp"

#include "doctest.h"

using namespace deepprae;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

DominatingSet without(const DominatingSet& d, std::size_t k) {
  DominatingSet out = d;
  out.points.erase(out.points.begin() + static_cast<long>(k));
  out.tilts.erase(out.tilts.begin() + static_cast<long>(k));
  out.rates.erase(out.rates.begin() + static_cast<long>(k));
  return out;
}

// x >= gamma (identity) and x <= -k gamma (sign flipped), each an upper set in its own coordinates.
std::vector<UpperHullRegion> peril_pieces(double gamma, double k) {
  const Box box = Box::cube(1, 0.0, 10.0);
  return {UpperHullRegion(MonotoneHull(HullKind::Upper, Mat::Constant(1, 1, gamma)), box, Orientation::identity(1)),
          UpperHullRegion(MonotoneHull(HullKind::Upper, Mat::Constant(1, 1, k * gamma)), box,
                          Orientation{v1(-1.0), v1(0.0)})};
}

}  // namespace

TEST_CASE("corner set has a single dominating point") {
  Vec a(2);
  a << 1.0, 2.0;
  const Family f = GaussianFamily::isotropic(Vec::Zero(2), 1.0);
  const UpperHullRegion region(MonotoneHull(HullKind::Upper, a.transpose()), Box::cube(2, 0.0, 6.0),
                               Orientation::identity(2));
  const auto dom = search(region, f);
  REQUIRE(dom.points.size() == 1);
  CHECK((dom.points[0] - a).lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK(dom.status == ResidualStatus::Covered);
  CHECK(verify_coverage(dom, region, f));
  CHECK_FALSE(verify_coverage(without(dom, 0), region, f));
}

TEST_CASE("two-ray geometry gives both endpoints") {
  const Family f = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  std::vector<double> found;
  for (const auto& piece : peril_pieces(3.0, 0.5)) {
    const auto dom = search(piece, f);
    REQUIRE(dom.points.size() == 1);
    found.push_back(dom.points[0][0]);
    CHECK(verify_coverage(dom, piece, f));
    CHECK_FALSE(verify_coverage(without(dom, 0), piece, f));
  }
  CHECK(found[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(found[1] == doctest::Approx(-1.5).epsilon(1e-6));
}

TEST_CASE("staircase complement: points in the set, rates ordered, covered") {
  Mat f(3, 2);
  f << 1.0, 4.0, 2.5, 2.5, 4.0, 1.0;
  Vec mean(2);
  mean << 0.5, 0.5;
  const Family fam = GaussianFamily::isotropic(mean, 1.0);
  const HullComplementRegion region(MonotoneHull(HullKind::Lower, f), Box::cube(2, 0.0, 8.0), Orientation::identity(2));
  const auto dom = search(region, fam);
  CHECK(dom.status == ResidualStatus::Covered);
  CHECK(dom.points.size() >= 2);
  for (std::size_t i = 0; i < dom.points.size(); ++i) {
    CHECK(region.hull().margin(dom.points[i]) >= -1e-6);
    if (i > 0) CHECK(dom.rates[i] >= dom.rates[i - 1] - 1e-6);
  }
  CHECK(verify_coverage(dom, region, fam));
  const auto csv = dominating_set_to_csv(dom);
  CHECK(csv.rfind("order,rate,a1,a2,s1,s2\n", 0) == 0);
}

TEST_CASE("empty learned set needs no points") {
  MlpParams p = zero_params(MlpSpec{1, {1}});
  p.layers[1].bias[0] = -1.0;  // g = -1 everywhere
  const Box box = Box::cube(1, 0.0, 5.0);
  LearnedSet s{p, 0.0, Direction::Inner, MonotoneHull(HullKind::Upper, Mat::Constant(1, 1, 2.0)), box,
               Orientation::identity(1)};
  const LearnedRegion region(s);
  const Family f = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  const auto dom = search(region, f);
  CHECK(dom.points.empty());
  CHECK(verify_coverage(dom, region, f));
}

TEST_CASE("point cap demotes the status") {
  Mat f(3, 2);
  f << 1.0, 4.0, 2.5, 2.5, 4.0, 1.0;
  const Family fam = GaussianFamily::isotropic(Vec::Zero(2), 1.0);
  const HullComplementRegion region(MonotoneHull(HullKind::Lower, f), Box::cube(2, 0.0, 8.0), Orientation::identity(2));
  SearchConfig cfg;
  cfg.max_points = 1;
  const auto dom = search(region, fam, cfg);
  CHECK(dom.points.size() == 1);
  CHECK(dom.status == ResidualStatus::NodeLimitUncovered);
}

TEST_CASE("non-Gaussian families are rejected") {
  const UpperHullRegion region(MonotoneHull(HullKind::Upper, Mat::Constant(1, 1, 2.0)), Box::cube(1, 0.0, 5.0),
                               Orientation::identity(1));
  CHECK_THROWS(search(region, GammaFamily(2.0, 1.0)));
}
