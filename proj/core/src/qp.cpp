#include "deepprae/qp.hpp"

#include "deepprae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deepprae::milp {

namespace {

constexpr double kInf = 1e20;
constexpr double kRhoMin = 1e-6, kRhoMax = 1e6, kRhoEqScale = 1e3;

double inf_norm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

bool is_inf(double b) { return !std::isfinite(b) || std::abs(b) >= kInf; }

struct Scaled {
  Mat P, A;
  Vec q, l, u;
  Vec D, E;
  double c = 1.0;
};

double clamp_scale(double v) {
  if (v < 1e-4) return 1.0;
  return std::clamp(v, 1e-4, 1e4);
}

// Ruiz equilibration of the KKT matrix followed by cost scaling.
Scaled equilibrate(const QpProblem& p, int iters) {
  const auto n = p.P.cols(), m = p.A.rows();
  Scaled s{p.P, p.A, p.q, p.l, p.u, Vec::Ones(n), Vec::Ones(m), 1.0};
  for (int k = 0; k < iters; ++k) {
    Vec dt(n), et(m);
    for (Eigen::Index j = 0; j < n; ++j) {
      double v = s.P.col(j).cwiseAbs().maxCoeff();
      if (m) v = std::max(v, s.A.col(j).cwiseAbs().maxCoeff());
      dt[j] = 1.0 / std::sqrt(clamp_scale(v));
    }
    for (Eigen::Index i = 0; i < m; ++i) et[i] = 1.0 / std::sqrt(clamp_scale(s.A.row(i).cwiseAbs().maxCoeff()));
    s.P = dt.asDiagonal() * s.P * dt.asDiagonal();
    s.A = et.asDiagonal() * s.A * dt.asDiagonal();
    s.q = dt.cwiseProduct(s.q);
    s.D = s.D.cwiseProduct(dt);
    s.E = s.E.cwiseProduct(et);
  }
  double pn = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) pn += s.P.col(j).cwiseAbs().maxCoeff();
  pn = n ? pn / static_cast<double>(n) : 0.0;
  s.c = 1.0 / clamp_scale(std::max(pn, inf_norm(s.q)));
  s.P *= s.c;
  s.q *= s.c;
  for (Eigen::Index i = 0; i < m; ++i) {
    s.l[i] = is_inf(p.l[i]) ? -kInf : p.l[i] * s.E[i];
    s.u[i] = is_inf(p.u[i]) ? kInf : p.u[i] * s.E[i];
  }
  return s;
}

struct Residuals {
  double prim = 0, dual = 0, eps_prim = 0, eps_dual = 0;
  bool converged() const { return prim <= eps_prim && dual <= eps_dual; }
};

Residuals residuals(const Scaled& s, const Vec& x, const Vec& z, const Vec& y, const QpSettings& cfg) {
  const Vec Ax = s.A * x;
  const Vec Einv = s.E.cwiseInverse();
  const Vec Dinv = s.D.cwiseInverse();
  Residuals r;
  r.prim = inf_norm(Einv.cwiseProduct(Ax - z));
  const Vec Px = s.P * x, Aty = s.A.transpose() * y;
  r.dual = inf_norm(Dinv.cwiseProduct(Px + s.q + Aty)) / s.c;
  r.eps_prim = cfg.eps_abs + cfg.eps_rel * std::max(inf_norm(Einv.cwiseProduct(Ax)), inf_norm(Einv.cwiseProduct(z)));
  r.eps_dual = cfg.eps_abs + cfg.eps_rel / s.c *
                                 std::max({inf_norm(Dinv.cwiseProduct(Px)), inf_norm(Dinv.cwiseProduct(Aty)),
                                           inf_norm(Dinv.cwiseProduct(s.q))});
  return r;
}

bool primal_infeasible(const Scaled& s, const QpProblem& p, const Vec& dy, double eps) {
  const Vec dyu = s.E.cwiseProduct(dy);
  const double norm = inf_norm(dyu);
  if (norm < 1e-30) return false;
  const Vec aty = s.D.cwiseInverse().cwiseProduct(s.A.transpose() * dy);
  if (inf_norm(aty) > eps * norm) return false;
  double support = 0.0;
  for (Eigen::Index i = 0; i < dyu.size(); ++i) {
    if (dyu[i] > eps * norm) {
      if (is_inf(p.u[i])) return false;
      support += p.u[i] * dyu[i];
    } else if (dyu[i] < -eps * norm) {
      if (is_inf(p.l[i])) return false;
      support += p.l[i] * dyu[i];
    }
  }
  return support < -eps * norm;
}

Vec project(const Vec& v, const Vec& l, const Vec& u) { return v.cwiseMax(l).cwiseMin(u); }

struct Polished {
  bool ok = false;
  Vec x, z, y;
  Residuals r;
};

Polished polish(const Scaled& s, const Vec& /*x*/, const Vec& z, const Vec& y, const QpSettings& cfg) {
  const auto n = s.P.cols(), m = s.A.rows();
  std::vector<Eigen::Index> rows;
  std::vector<double> rhs;
  std::vector<int> side;  // -1 lower, +1 upper, 0 equality
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool eq = std::abs(s.u[i] - s.l[i]) <= 1e-12 * std::max(1.0, std::abs(s.l[i]));
    if (eq) {
      rows.push_back(i);
      rhs.push_back(s.l[i]);
      side.push_back(0);
    } else if (s.l[i] > -kInf && z[i] - s.l[i] < -y[i]) {
      rows.push_back(i);
      rhs.push_back(s.l[i]);
      side.push_back(-1);
    } else if (s.u[i] < kInf && s.u[i] - z[i] < y[i]) {
      rows.push_back(i);
      rhs.push_back(s.u[i]);
      side.push_back(1);
    }
  }
  const auto k = static_cast<Eigen::Index>(rows.size());
  Polished out;
  if (k > n + m) return out;
  Mat K = Mat::Zero(n + k, n + k);
  K.topLeftCorner(n, n) = s.P;
  for (Eigen::Index a = 0; a < k; ++a) {
    K.block(n + a, 0, 1, n) = s.A.row(rows[a]);
    K.block(0, n + a, n, 1) = s.A.row(rows[a]).transpose();
  }
  Mat Kreg = K;
  constexpr double delta = 1e-9;
  Kreg.topLeftCorner(n, n).diagonal().array() += delta;
  Kreg.bottomRightCorner(k, k).diagonal().array() -= delta;
  Eigen::LDLT<Mat> ldlt(Kreg);
  if (ldlt.info() != Eigen::Success) return out;
  Vec b(n + k);
  b.head(n) = -s.q;
  for (Eigen::Index a = 0; a < k; ++a) b[n + a] = rhs[a];
  Vec sol = ldlt.solve(b);
  for (int it = 0; it < 5; ++it) sol += ldlt.solve(b - K * sol);
  if (!sol.allFinite()) return out;

  out.x = sol.head(n);
  out.y = Vec::Zero(m);
  for (Eigen::Index a = 0; a < k; ++a) out.y[rows[a]] = sol[n + a];
  out.z = project(s.A * out.x, s.l, s.u);
  out.r = residuals(s, out.x, out.z, out.y, cfg);
  for (Eigen::Index a = 0; a < k; ++a) {
    const double yu = out.y[rows[a]] * s.E[rows[a]] / s.c;
    if ((side[a] < 0 && yu > out.r.eps_dual) || (side[a] > 0 && yu < -out.r.eps_dual)) return out;
  }
  out.ok = out.r.converged();
  return out;
}

}  // namespace

QpResult solve_qp(const QpProblem& prob, const QpSettings& cfg, const Vec* x0, const Vec* y0) {
  const auto n = prob.P.cols(), m = prob.A.rows();
  if (prob.P.rows() != n || prob.q.size() != n || prob.A.cols() != n || prob.l.size() != m || prob.u.size() != m)
    throw DimensionMismatch("qp problem shapes");
  for (Eigen::Index i = 0; i < m; ++i)
    if (prob.l[i] > prob.u[i]) {
      QpResult r;
      r.status = QpStatus::PrimalInfeasible;
      return r;
    }

  const Scaled s = equilibrate(prob, cfg.scaling_iters);
  Vec x = Vec::Zero(n), z, y = Vec::Zero(m);
  if (x0 && x0->size() == n) x = s.D.cwiseInverse().cwiseProduct(*x0);
  if (y0 && y0->size() == m) y = s.c * s.E.cwiseInverse().cwiseProduct(*y0);
  z = project(s.A * x, s.l, s.u);

  double rho = cfg.rho;
  Vec rho_vec(m);
  auto set_rho = [&](double r) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (s.l[i] <= -kInf && s.u[i] >= kInf)
        rho_vec[i] = kRhoMin;
      else if (std::abs(s.u[i] - s.l[i]) <= 1e-12 * std::max(1.0, std::abs(s.l[i])))
        rho_vec[i] = kRhoEqScale * r;
      else
        rho_vec[i] = r;
    }
  };
  Eigen::LLT<Mat> llt;
  auto factor = [&] {
    Mat K = s.P + s.A.transpose() * rho_vec.asDiagonal() * s.A;
    K.diagonal().array() += cfg.sigma;
    llt.compute(K);
    if (llt.info() != Eigen::Success) throw ConvergenceError("qp: KKT factorization failed");
  };
  set_rho(rho);
  factor();

  QpResult res;
  auto finish = [&](const Vec& xs, const Vec& ys, const Residuals& r, QpStatus st, int it, bool pol) {
    res.status = st;
    res.x = s.D.cwiseProduct(xs);
    res.y = s.E.cwiseProduct(ys) / s.c;
    res.objective = 0.5 * res.x.dot(prob.P * res.x) + prob.q.dot(res.x);
    res.prim_res = r.prim;
    res.dual_res = r.dual;
    res.iterations = it;
    res.polished = pol;
    return res;
  };

  double last_polish = std::numeric_limits<double>::infinity();
  Residuals r;
  constexpr int check_every = 10, adapt_every = 50;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Vec rhs = cfg.sigma * x - s.q + s.A.transpose() * (rho_vec.cwiseProduct(z) - y);
    const Vec xt = llt.solve(rhs);
    const Vec zt = s.A * xt;
    const Vec xn = cfg.alpha * xt + (1 - cfg.alpha) * x;
    const Vec zr = cfg.alpha * zt + (1 - cfg.alpha) * z;
    const Vec zn = project(zr + y.cwiseQuotient(rho_vec), s.l, s.u);
    const Vec dy = rho_vec.cwiseProduct(zr - zn);
    x = xn;
    z = zn;
    y += dy;

    if (it % check_every != 0 && it != cfg.max_iter) continue;
    r = residuals(s, x, z, y, cfg);
    if (r.converged()) {
      if (cfg.polish) {
        Polished p = polish(s, x, z, y, cfg);
        if (p.ok && p.r.prim <= r.prim + r.eps_prim && p.r.dual <= r.dual + r.eps_dual)
          return finish(p.x, p.y, p.r, QpStatus::Solved, it, true);
      }
      return finish(x, y, r, QpStatus::Solved, it, false);
    }
    if (primal_infeasible(s, prob, dy, cfg.eps_infeasible)) return finish(x, y, r, QpStatus::PrimalInfeasible, it, false);

    const double progress = std::max(r.prim / r.eps_prim, r.dual / r.eps_dual);
    if (cfg.polish && progress < 1e5 && progress * 10 < last_polish) {
      last_polish = progress;
      Polished p = polish(s, x, z, y, cfg);
      if (p.ok) return finish(p.x, p.y, p.r, QpStatus::Solved, it, true);
    }

    if (it % adapt_every == 0) {
      const Vec Ax = s.A * x, Px = s.P * x, Aty = s.A.transpose() * y;
      const double pn = std::max(inf_norm(Ax), inf_norm(z));
      const double dn = std::max({inf_norm(Px), inf_norm(Aty), inf_norm(s.q)});
      const double ps = inf_norm(Ax - z) / std::max(pn, 1e-30);
      const double ds = inf_norm(Px + s.q + Aty) / std::max(dn, 1e-30);
      if (ps > 0 && ds > 0) {
        const double nr = std::clamp(rho * std::sqrt(ps / ds), kRhoMin, kRhoMax);
        if (nr > 5 * rho || nr < rho / 5) {
          rho = nr;
          set_rho(rho);
          factor();
        }
      }
    }
  }
  if (cfg.polish) {
    Polished p = polish(s, x, z, y, cfg);
    if (p.ok) return finish(p.x, p.y, p.r, QpStatus::Solved, cfg.max_iter, true);
  }
  const auto st = r.prim > cfg.infeasible_residual ? QpStatus::PrimalInfeasible : QpStatus::Inaccurate;
  return finish(x, y, r, st, cfg.max_iter, false);
}

}  // namespace deepprae::milp
