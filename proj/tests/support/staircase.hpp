#pragma once

#include "deepprae/common.hpp"

#include <random>
#include <vector>

namespace testsupport {

// Rare set = complement of a union of origin-anchored boxes [0, c_k]:
// an upper set in [0, M]^d with a staircase boundary.
struct Staircase {
  std::vector<deepprae::Vec> corners;

  static Staircase random(int d, int steps, double M, deepprae::Rng& rng) {
    std::uniform_real_distribution<double> u(0.35 * M, 0.8 * M);
    Staircase s;
    for (int k = 0; k < steps; ++k) {
      deepprae::Vec c(d);
      for (int j = 0; j < d; ++j) c[j] = u(rng);
      s.corners.push_back(c);
    }
    return s;
  }

  bool rare(const deepprae::Vec& x) const {
    for (const auto& c : corners)
      if ((x.array() <= c.array()).all()) return false;
    return true;
  }
};

}  // namespace testsupport
