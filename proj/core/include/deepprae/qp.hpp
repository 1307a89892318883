#pragma once

#include "deepprae/common.hpp"

namespace deepprae::milp {

// min 1/2 x'Px + q'x  s.t.  l <= Ax <= u   (entries of l/u may be infinite)
struct QpProblem {
  Mat P;
  Vec q;
  Mat A;
  Vec l;
  Vec u;
};

struct QpSettings {
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  double eps_infeasible = 1e-7;
  double infeasible_residual = 1e-6;
  int max_iter = 20000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int scaling_iters = 10;
  bool polish = true;
};

enum class QpStatus { Solved, PrimalInfeasible, Inaccurate };

struct QpResult {
  QpStatus status = QpStatus::Inaccurate;
  Vec x;
  Vec y;
  double objective = 0.0;
  double prim_res = 0.0;
  double dual_res = 0.0;
  int iterations = 0;
  bool polished = false;
};

QpResult solve_qp(const QpProblem& prob, const QpSettings& cfg = {}, const Vec* x0 = nullptr,
                  const Vec* y0 = nullptr);

}  // namespace deepprae::milp
