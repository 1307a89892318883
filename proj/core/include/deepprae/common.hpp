#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace deepprae {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

enum class Direction { Outer, Inner };

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

// Axis-aligned domain, usually [0, M]^d in oriented coordinates.
struct Box {
  Vec lower;
  Vec upper;

  static Box cube(int dim, double lo, double hi);
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& x) const;
};

// Pairwise (tree) summation; result depends only on the input order.
double pairwise_sum(std::span<const double> v);

// Standard normal upper tail via erfc.
double normal_sf(double x);

}  // namespace deepprae
