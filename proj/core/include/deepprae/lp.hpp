#pragma once

#include "deepprae/common.hpp"

namespace deepprae::milp {

// min c'x  s.t.  row_lo <= A x <= row_hi,  col_lo <= x <= col_hi.
// Column bounds must be finite; row bounds may be +-inf on one side.
struct LpProblem {
  Vec c;
  Mat A;
  Vec row_lo, row_hi;
  Vec col_lo, col_hi;
};

enum class LpStatus { Optimal, Infeasible, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vec x;
  double objective = 0.0;
  int pivots = 0;
};

// Dense bounded-variable primal simplex (two phases, explicit basis inverse).
LpResult solve_lp(const LpProblem& lp, int max_pivots = 50000);

}  // namespace deepprae::milp
