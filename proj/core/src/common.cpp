#include "deepprae/common.hpp"

#include "deepprae/errors.hpp"

#include <cmath>

namespace deepprae {

std::string_view to_string(Direction d) { return d == Direction::Outer ? "upper" : "lower"; }

Direction direction_from_string(std::string_view s) {
  if (s == "upper" || s == "outer") return Direction::Outer;
  if (s == "lower" || s == "inner") return Direction::Inner;
  throw InvalidArgument("unknown direction '" + std::string(s) + "'");
}

Box Box::cube(int dim, double lo, double hi) {
  return Box{Vec::Constant(dim, lo), Vec::Constant(dim, hi)};
}

bool Box::contains(const Vec& x) const {
  if (x.size() != lower.size()) throw DimensionMismatch("box dimension mismatch");
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace deepprae
