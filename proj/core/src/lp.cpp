#include "deepprae/lp.hpp"

#include "deepprae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace deepprae::milp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr int kRefactorEvery = 40;

bool infinite(double v) { return !std::isfinite(v) || std::abs(v) >= 1e20; }

// Columns: structural x (n), row slacks s = A x (m), artificials (m).
// Constraint i:  a_i'x - s_i + sigma_i t_i = 0.
class Simplex {
 public:
  explicit Simplex(const LpProblem& lp) : lp_(lp) {
    n_ = static_cast<int>(lp.A.cols());
    m_ = static_cast<int>(lp.A.rows());
    const int N = n_ + 2 * m_;
    lo_.resize(N);
    hi_.resize(N);
    val_.assign(N, 0.0);
    sigma_.assign(m_, 1.0);
    for (int j = 0; j < n_; ++j) {
      lo_[j] = lp.col_lo[j];
      hi_[j] = lp.col_hi[j];
      val_[j] = lo_[j];
    }
    for (int i = 0; i < m_; ++i) {
      lo_[n_ + i] = infinite(lp.row_lo[i]) ? -kInf : lp.row_lo[i];
      hi_[n_ + i] = infinite(lp.row_hi[i]) ? kInf : lp.row_hi[i];
      lo_[n_ + m_ + i] = 0.0;
      hi_[n_ + m_ + i] = kInf;
    }
    basis_.resize(m_);
    pos_.assign(N, -1);
    const Vec ax = lp.A * Eigen::Map<const Vec>(val_.data(), n_);
    for (int i = 0; i < m_; ++i) {
      const int s = n_ + i, t = n_ + m_ + i;
      if (ax[i] >= lo_[s] && ax[i] <= hi_[s]) {
        val_[s] = ax[i];
        val_[t] = 0.0;
        hi_[t] = 0.0;
        basis_[i] = s;
      } else {
        const double b = ax[i] < lo_[s] ? lo_[s] : hi_[s];
        val_[s] = b;
        sigma_[i] = b - ax[i] > 0 ? 1.0 : -1.0;
        val_[t] = std::abs(b - ax[i]);
        basis_[i] = t;
        artificial_rows_.push_back(i);
      }
      pos_[basis_[i]] = i;
    }
    Binv_ = Mat::Zero(m_, m_);
    refactor();
  }

  LpResult run(int max_pivots) {
    LpResult res;
    if (!artificial_rows_.empty()) {
      Vec c1 = Vec::Zero(n_ + 2 * m_);
      for (int i : artificial_rows_) c1[n_ + m_ + i] = 1.0;
      if (!optimize(c1, max_pivots, res.pivots)) {
        res.status = LpStatus::IterationLimit;
        return res;
      }
      double infeas = 0.0, scale = 1.0;
      for (int i : artificial_rows_) infeas = std::max(infeas, val_[n_ + m_ + i]);
      for (int j = 0; j < n_; ++j) scale = std::max(scale, std::max(std::abs(lo_[j]), std::abs(hi_[j])));
      if (infeas > 1e-9 * scale * (1.0 + lp_.A.cwiseAbs().maxCoeff())) {
        res.status = LpStatus::Infeasible;
        return res;
      }
      for (int i : artificial_rows_) {
        hi_[n_ + m_ + i] = 0.0;
        if (pos_[n_ + m_ + i] < 0) val_[n_ + m_ + i] = 0.0;
      }
    }
    Vec c2 = Vec::Zero(n_ + 2 * m_);
    c2.head(n_) = lp_.c;
    if (!optimize(c2, max_pivots, res.pivots)) {
      res.status = LpStatus::IterationLimit;
      return res;
    }
    res.status = LpStatus::Optimal;
    res.x.resize(n_);
    for (int j = 0; j < n_; ++j) res.x[j] = std::clamp(val_[j], lo_[j], hi_[j]);
    res.objective = lp_.c.dot(res.x);
    return res;
  }

 private:
  Vec column(int j) const {
    if (j < n_) return lp_.A.col(j);
    Vec e = Vec::Zero(m_);
    if (j < n_ + m_)
      e[j - n_] = -1.0;
    else
      e[j - n_ - m_] = sigma_[j - n_ - m_];
    return e;
  }

  void refactor() {
    Mat B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = column(basis_[i]);
    Eigen::PartialPivLU<Mat> lu(B);
    Binv_ = lu.inverse();
    // x_B = -B^{-1} N x_N
    Vec rhs = Vec::Zero(m_);
    for (int j = 0; j < n_ + 2 * m_; ++j)
      if (pos_[j] < 0 && val_[j] != 0.0) rhs -= column(j) * val_[j];
    const Vec xb = Binv_ * rhs;
    for (int i = 0; i < m_; ++i) val_[basis_[i]] = xb[i];
    since_refactor_ = 0;
  }

  // Returns false on pivot limit.
  bool optimize(const Vec& c, int max_pivots, int& pivots) {
    const int N = n_ + 2 * m_;
    int degenerate = 0;
    while (true) {
      if (pivots >= max_pivots) return false;
      Vec cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = c[basis_[i]];
      const Vec pi = Binv_.transpose() * cb;
      const Vec dA = lp_.A.transpose() * pi;
      const bool bland = degenerate > 50;
      int enter = -1;
      double best = 0.0, dir = 0.0;
      for (int j = 0; j < N; ++j) {
        if (pos_[j] >= 0 || lo_[j] == hi_[j]) continue;
        double d;
        if (j < n_)
          d = c[j] - dA[j];
        else if (j < n_ + m_)
          d = c[j] + pi[j - n_];
        else
          d = c[j] - sigma_[j - n_ - m_] * pi[j - n_ - m_];
        const bool at_lo = val_[j] <= lo_[j];
        const bool at_hi = val_[j] >= hi_[j];
        double score = 0.0, sdir = 0.0;
        if (d < -kCostTol && !at_hi) {
          score = -d;
          sdir = 1.0;
        } else if (d > kCostTol && !at_lo) {
          score = d;
          sdir = -1.0;
        }
        if (sdir == 0.0) continue;
        if (j < n_) score /= std::max(1.0, lp_.A.col(j).norm());
        if (bland) {
          enter = j;
          dir = sdir;
          break;
        }
        if (score > best) {
          best = score;
          enter = j;
          dir = sdir;
        }
      }
      if (enter < 0) return true;

      const Vec alpha = Binv_ * column(enter);
      // Basic values move by -theta * dir * alpha.
      double theta = hi_[enter] - lo_[enter];
      int leave = -1;
      double leave_mag = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double a = dir * alpha[i];
        if (std::abs(a) <= kPivotTol) continue;
        const int b = basis_[i];
        double lim;
        if (a > 0)
          lim = lo_[b] == -kInf ? kInf : (val_[b] - lo_[b]) / a;
        else
          lim = hi_[b] == kInf ? kInf : (hi_[b] - val_[b]) / -a;
        lim = std::max(lim, 0.0);
        if (lim < theta - 1e-12 || (lim <= theta + 1e-12 && std::abs(a) > leave_mag)) {
          theta = std::min(theta, lim);
          leave = i;
          leave_mag = std::abs(a);
        }
      }
      if (theta == kInf) throw ConvergenceError("lp relaxation unbounded");
      ++pivots;
      degenerate = theta <= 1e-12 ? degenerate + 1 : 0;

      for (int i = 0; i < m_; ++i) val_[basis_[i]] -= theta * dir * alpha[i];
      val_[enter] += theta * dir;
      if (leave < 0) {
        val_[enter] = dir > 0 ? hi_[enter] : lo_[enter];  // bound flip
        continue;
      }
      const int out = basis_[leave];
      const double a = dir * alpha[leave];
      val_[out] = a > 0 ? lo_[out] : hi_[out];
      pos_[out] = -1;
      basis_[leave] = enter;
      pos_[enter] = leave;
      // Rank-one update of the basis inverse.
      const double piv = alpha[leave];
      const Vec row = Binv_.row(leave) / piv;
      for (int i = 0; i < m_; ++i)
        if (i != leave) Binv_.row(i) -= alpha[i] * row.transpose();
      Binv_.row(leave) = row;
      if (++since_refactor_ >= kRefactorEvery) refactor();
    }
  }

  const LpProblem& lp_;
  int n_ = 0, m_ = 0;
  std::vector<double> lo_, hi_, val_, sigma_;
  std::vector<int> basis_, pos_, artificial_rows_;
  Mat Binv_;
  int since_refactor_ = 0;
};

}  // namespace

LpResult solve_lp(const LpProblem& lp, int max_pivots) {
  const auto n = lp.A.cols(), m = lp.A.rows();
  if (lp.c.size() != n || lp.row_lo.size() != m || lp.row_hi.size() != m || lp.col_lo.size() != n ||
      lp.col_hi.size() != n)
    throw DimensionMismatch("lp problem shapes");
  for (Eigen::Index j = 0; j < n; ++j)
    if (infinite(lp.col_lo[j]) || infinite(lp.col_hi[j])) throw DomainError("lp columns need finite bounds");
  for (Eigen::Index j = 0; j < n; ++j)
    if (lp.col_lo[j] > lp.col_hi[j]) return {};
  for (Eigen::Index i = 0; i < m; ++i)
    if (lp.row_lo[i] > lp.row_hi[i]) return {};
  if (m == 0) {
    LpResult r;
    r.status = LpStatus::Optimal;
    r.x.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) r.x[j] = lp.c[j] >= 0 ? lp.col_lo[j] : lp.col_hi[j];
    r.objective = lp.c.dot(r.x);
    return r;
  }
  Simplex s(lp);
  return s.run(max_pivots);
}

}  // namespace deepprae::milp
