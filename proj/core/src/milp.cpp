#include "deepprae/milp.hpp"

#include "deepprae/errors.hpp"
#include "deepprae/lp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <sstream>

namespace deepprae::milp {

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NodeLimit: return "node_limit";
    case SolveStatus::TargetReached: return "target_reached";
  }
  return "?";
}

// ----------------------------------------------------------------- problem

int MilpProblem::add_continuous(double lo, double hi, std::string name) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw DomainError("milp variables need finite bounds");
  if (lo > hi) throw DomainError("milp variable lower bound exceeds upper bound");
  const int v = var_count();
  type_.push_back(VarType::Continuous);
  lo_.push_back(lo);
  hi_.push_back(hi);
  names_.push_back(name.empty() ? "x" + std::to_string(v) : std::move(name));
  return v;
}

int MilpProblem::add_binary(std::string name) {
  const int v = var_count();
  type_.push_back(VarType::Binary);
  lo_.push_back(0.0);
  hi_.push_back(1.0);
  names_.push_back(name.empty() ? "z" + std::to_string(v) : std::move(name));
  return v;
}

int MilpProblem::add_row(std::vector<Term> terms, Relation rel, double rhs, std::string name) {
  for (const auto& t : terms)
    if (t.var < 0 || t.var >= var_count()) throw InvalidArgument("milp row references unknown variable");
  if (!std::isfinite(rhs)) throw DomainError("milp row rhs must be finite");
  const int r = static_cast<int>(rows_.size());
  rows_.push_back(Row{std::move(terms), rel, rhs, name.empty() ? "r" + std::to_string(r) : std::move(name)});
  return r;
}

void MilpProblem::add_indicator_group(IndicatorGroup g) {
  if (g.binaries.size() != g.rows.size()) throw InvalidArgument("indicator group shape");
  for (int b : g.binaries)
    if (b < 0 || b >= var_count() || type_[b] != VarType::Binary) throw InvalidArgument("indicator needs binaries");
  groups_.push_back(std::move(g));
}

void MilpProblem::set_bounds(int var, double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw DomainError("invalid variable bounds");
  if (type_[var] == VarType::Binary && (lo < 0 || hi > 1)) throw DomainError("binary bounds must lie in [0,1]");
  lo_[var] = lo;
  hi_[var] = hi;
}

void MilpProblem::set_linear_objective(std::vector<Term> c, Sense sense, double constant) {
  quad_.clear();
  lin_ = std::move(c);
  sense_ = sense;
  constant_ = constant;
}

void MilpProblem::set_quadratic_objective(std::vector<QuadTerm> q, std::vector<Term> c, double constant) {
  quad_ = std::move(q);
  lin_ = std::move(c);
  sense_ = Sense::Min;
  constant_ = constant;
  validate();
}

int MilpProblem::n_cont() const {
  return static_cast<int>(std::count(type_.begin(), type_.end(), VarType::Continuous));
}
int MilpProblem::n_bin() const { return var_count() - n_cont(); }

double MilpProblem::objective(const Vec& x) const {
  double f = constant_;
  for (const auto& t : lin_) f += t.coef * x[t.var];
  for (const auto& q : quad_) f += 0.5 * q.value * x[q.i] * x[q.j];
  return f;
}

double MilpProblem::row_activity(int r, const Vec& x) const {
  double a = 0.0;
  for (const auto& t : rows_[r].terms) a += t.coef * x[t.var];
  return a;
}

double MilpProblem::row_violation(int r, const Vec& x) const {
  const double a = row_activity(r, x);
  const auto& row = rows_[r];
  switch (row.rel) {
    case Relation::Le: return std::max(0.0, a - row.rhs);
    case Relation::Ge: return std::max(0.0, row.rhs - a);
    case Relation::Eq: return std::abs(a - row.rhs);
  }
  return 0.0;
}

double MilpProblem::max_violation(const Vec& x) const {
  double v = 0.0;
  for (int r = 0; r < static_cast<int>(rows_.size()); ++r) v = std::max(v, row_violation(r, x));
  for (int j = 0; j < var_count(); ++j) {
    v = std::max({v, lo_[j] - x[j], x[j] - hi_[j]});
    if (type_[j] == VarType::Binary) v = std::max(v, std::abs(x[j] - std::round(x[j])));
  }
  return v;
}

void MilpProblem::validate() const {
  if (quad_.empty()) return;
  std::vector<int> touched;
  for (const auto& q : quad_) {
    if (q.i < 0 || q.j < 0 || q.i >= var_count() || q.j >= var_count())
      throw InvalidArgument("quadratic term references unknown variable");
    touched.push_back(q.i);
    touched.push_back(q.j);
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  std::vector<int> pos(var_count(), -1);
  for (std::size_t k = 0; k < touched.size(); ++k) pos[touched[k]] = static_cast<int>(k);
  Mat Q = Mat::Zero(touched.size(), touched.size());
  for (const auto& q : quad_) Q(pos[q.i], pos[q.j]) += q.value;
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9) throw DomainError("quadratic objective must be symmetric");
  Mat R = Q;
  R.diagonal().array() += 1e-12;
  Eigen::LDLT<Mat> ldlt(R);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() < -1e-10).any())
    throw DomainError("quadratic objective must be positive semidefinite");
}

std::string MilpProblem::to_lp() const {
  std::ostringstream os;
  os.precision(17);
  auto lin = [&](const std::vector<Term>& ts) {
    bool first = true;
    for (const auto& t : ts) {
      if (t.coef == 0.0) continue;
      os << (t.coef < 0 ? " - " : (first ? " " : " + ")) << std::abs(t.coef) << ' ' << names_[t.var];
      first = false;
    }
    if (first) os << " 0 " << (names_.empty() ? "x0" : names_[0]);
  };
  os << "\\ deepprae milp dump\n" << (sense_ == Sense::Min ? "Minimize\n" : "Maximize\n") << " obj:";
  lin(lin_);
  if (!quad_.empty()) {
    os << " + [";
    bool first = true;
    for (const auto& q : quad_) {
      if (q.value == 0.0) continue;
      os << (q.value < 0 ? " - " : (first ? " " : " + ")) << std::abs(q.value) << ' ' << names_[q.i];
      if (q.i == q.j)
        os << " ^2";
      else
        os << " * " << names_[q.j];
      first = false;
    }
    os << " ] / 2";
  }
  if (constant_ != 0.0) os << (constant_ < 0 ? " - " : " + ") << std::abs(constant_) << " constant";
  os << "\nSubject To\n";
  for (const auto& r : rows_) {
    os << ' ' << r.name << ':';
    lin(r.terms);
    os << (r.rel == Relation::Le ? " <= " : r.rel == Relation::Ge ? " >= " : " = ") << r.rhs << '\n';
  }
  os << "Bounds\n";
  for (int j = 0; j < var_count(); ++j)
    if (type_[j] == VarType::Continuous) os << ' ' << lo_[j] << " <= " << names_[j] << " <= " << hi_[j] << '\n';
  if (constant_ != 0.0) os << " constant = 1\n";
  os << "Binaries\n";
  for (int j = 0; j < var_count(); ++j)
    if (type_[j] == VarType::Binary) os << ' ' << names_[j] << '\n';
  os << "End\n";
  return os.str();
}

Vec MilpSolution::continuous(const MilpProblem& p) const {
  Vec out(p.n_cont());
  int k = 0;
  for (int j = 0; j < p.var_count(); ++j)
    if (p.type(j) == VarType::Continuous) out[k++] = values[j];
  return out;
}

std::vector<int> MilpSolution::binaries(const MilpProblem& p) const {
  std::vector<int> out;
  for (int j = 0; j < p.var_count(); ++j)
    if (p.type(j) == VarType::Binary) out.push_back(static_cast<int>(std::lround(values[j])));
  return out;
}

// ------------------------------------------------------------------ engine

namespace {

constexpr double kIntTol = 1e-6;
constexpr double kFeasTol = 1e-6;
constexpr double kQpBig = 1e30;

struct Bounds {
  std::vector<double> lo, hi;
};

struct Relaxed {
  bool feasible = false;
  double bound = 0.0;  // valid lower bound on the internal (min-sense) objective
  Vec values;          // full assignment
};

struct Node {
  std::shared_ptr<const Node> parent;
  std::vector<std::tuple<int, double, double>> changes;
  double bound;
  int depth;
  long id;
  std::shared_ptr<const Vec> warm;
};

struct NodeOrder {
  bool operator()(const std::shared_ptr<const Node>& a, const std::shared_ptr<const Node>& b) const {
    if (a->bound != b->bound) return a->bound > b->bound;
    if (a->depth != b->depth) return a->depth < b->depth;
    return a->id > b->id;
  }
};

class Engine {
 public:
  Engine(const MilpProblem& p, const QpSettings& qp) : p_(p), qp_(qp) {
    const int n = p.var_count();
    var_rows_.resize(n);
    for (int r = 0; r < static_cast<int>(p.rows().size()); ++r)
      for (const auto& t : p.rows()[r].terms) var_rows_[t.var].push_back(r);
    row_group_.assign(p.rows().size(), -1);
    row_member_.assign(p.rows().size(), -1);
    bin_group_.assign(n, -1);
    for (int g = 0; g < static_cast<int>(p.groups().size()); ++g) {
      const auto& grp = p.groups()[g];
      for (std::size_t k = 0; k < grp.binaries.size(); ++k) {
        bin_group_[grp.binaries[k]] = g;
        for (int r : grp.rows[k]) {
          row_group_[r] = g;
          row_member_[r] = static_cast<int>(k);
        }
      }
      if (grp.cover_row >= 0) {
        row_group_[grp.cover_row] = g;
        row_member_[grp.cover_row] = -2;
      }
    }
    sign_ = p.sense() == Sense::Max ? -1.0 : 1.0;
    in_objective_.assign(n, 0);
    for (const auto& t : p.linear_terms()) in_objective_[t.var] = 1;
  }

  // internal objective <= limit, as a row; only for linear objectives.
  std::optional<Row> cutoff_row(double limit) const {
    if (!p_.quad_terms().empty() || !std::isfinite(limit)) return std::nullopt;
    Row r{{}, Relation::Le, limit - sign_ * p_.objective_constant(), "cutoff"};
    for (const auto& t : p_.linear_terms()) r.terms.push_back({t.var, sign_ * t.coef});
    return r;
  }

  double sign() const { return sign_; }

  Bounds root_bounds() const {
    Bounds b;
    for (int j = 0; j < p_.var_count(); ++j) {
      b.lo.push_back(p_.lower(j));
      b.hi.push_back(p_.upper(j));
    }
    return b;
  }

  double internal_objective(const Vec& v) const { return sign_ * p_.objective(v); }

  // Feasibility-based bound tightening. Returns false on proven infeasibility.
  // `extra` (objective cutoff row) is treated as row index nr.
  bool propagate(Bounds& b, const Row* extra = nullptr) const {
    const int nr = static_cast<int>(p_.rows().size());
    std::deque<int> queue;
    std::vector<char> queued(nr + 1, 1);
    for (int r = 0; r < nr; ++r) queue.push_back(r);
    if (extra)
      queue.push_back(nr);
    else
      queued[nr] = 0;
    long visits = 0;
    const long budget = 20L * std::max(nr, 1);
    while (!queue.empty() && visits++ < budget) {
      const int r = queue.front();
      queue.pop_front();
      queued[r] = 0;
      const Row& row = r == nr ? *extra : p_.rows()[r];
      double minact = 0, maxact = 0, scale = std::abs(row.rhs);
      for (const auto& t : row.terms) {
        const double a = t.coef, lo = b.lo[t.var], hi = b.hi[t.var];
        minact += a > 0 ? a * lo : a * hi;
        maxact += a > 0 ? a * hi : a * lo;
        scale += std::abs(a) * std::max(std::abs(lo), std::abs(hi));
      }
      const double tol = 1e-9 * (1.0 + scale);
      const bool le = row.rel != Relation::Ge, ge = row.rel != Relation::Le;
      if ((le && minact > row.rhs + tol) || (ge && maxact < row.rhs - tol)) return false;
      for (const auto& t : row.terms) {
        const int j = t.var;
        const double a = t.coef;
        if (a == 0.0) continue;
        double nlo = b.lo[j], nhi = b.hi[j];
        if (le) {
          const double rest = minact - (a > 0 ? a * b.lo[j] : a * b.hi[j]);
          const double lim = (row.rhs - rest) / a;
          const double slack = tol / std::abs(a);
          if (a > 0)
            nhi = std::min(nhi, lim + slack);
          else
            nlo = std::max(nlo, lim - slack);
        }
        if (ge) {
          const double rest = maxact - (a > 0 ? a * b.hi[j] : a * b.lo[j]);
          const double lim = (row.rhs - rest) / a;
          const double slack = tol / std::abs(a);
          if (a > 0)
            nlo = std::max(nlo, lim - slack);
          else
            nhi = std::min(nhi, lim + slack);
        }
        if (p_.type(j) == VarType::Binary) {
          nlo = nlo > kIntTol ? 1.0 : 0.0;
          nhi = nhi < 1.0 - kIntTol ? 0.0 : 1.0;
          if (nlo < b.lo[j]) nlo = b.lo[j];
          if (nhi > b.hi[j]) nhi = b.hi[j];
        }
        const double range = std::max(1.0, b.hi[j] - b.lo[j]);
        bool changed = false;
        if (nlo > b.lo[j] + 1e-7 * range) {
          b.lo[j] = nlo;
          changed = true;
        }
        if (nhi < b.hi[j] - 1e-7 * range) {
          b.hi[j] = nhi;
          changed = true;
        }
        if (b.lo[j] > b.hi[j]) {
          if (b.lo[j] > b.hi[j] + 1e-7 * range || p_.type(j) == VarType::Binary) return false;
          b.lo[j] = b.hi[j] = 0.5 * (b.lo[j] + b.hi[j]);
        }
        if (changed) {
          for (int rr : var_rows_[j])
            if (!queued[rr]) {
              queued[rr] = 1;
              queue.push_back(rr);
            }
          if (extra && !queued[nr] && in_objective_[j]) {
            queued[nr] = 1;
            queue.push_back(nr);
          }
        }
      }
    }
    return true;
  }

  // Row always satisfied under the bounds; `override_var` is pinned to `override_val`.
  bool redundant(int r, const Bounds& b, int override_var = -1, double override_val = 0.0) const {
    const Row& row = p_.rows()[r];
    double minact = 0, maxact = 0, scale = std::abs(row.rhs);
    for (const auto& t : row.terms) {
      double lo = b.lo[t.var], hi = b.hi[t.var];
      if (t.var == override_var) lo = hi = override_val;
      minact += t.coef > 0 ? t.coef * lo : t.coef * hi;
      maxact += t.coef > 0 ? t.coef * hi : t.coef * lo;
      scale += std::abs(t.coef) * std::max(std::abs(lo), std::abs(hi));
    }
    const double tol = 1e-12 * (1.0 + scale);
    switch (row.rel) {
      case Relation::Le: return maxact <= row.rhs + tol;
      case Relation::Ge: return minact >= row.rhs - tol;
      case Relation::Eq: return maxact - minact <= tol && std::abs(maxact - row.rhs) <= tol;
    }
    return false;
  }

  std::vector<char> droppable_groups(const Bounds& b) const {
    std::vector<char> drop(p_.groups().size(), 0);
    for (std::size_t g = 0; g < p_.groups().size(); ++g) {
      const auto& grp = p_.groups()[g];
      std::vector<std::size_t> free;
      bool fixed_one = false;
      for (std::size_t k = 0; k < grp.binaries.size(); ++k) {
        const int z = grp.binaries[k];
        if (b.lo[z] > 0.5) fixed_one = true;
        if (b.lo[z] < 0.5 && b.hi[z] > 0.5) free.push_back(k);
      }
      if (fixed_one || free.size() < 2) continue;
      const double share = 1.0 / static_cast<double>(free.size());
      bool ok = true;
      for (std::size_t k : free) {
        for (int r : grp.rows[k])
          if (!redundant(r, b, grp.binaries[k], share)) {
            ok = false;
            break;
          }
        if (!ok) break;
      }
      drop[g] = ok;
    }
    return drop;
  }

  Relaxed relax(const Bounds& b, const Vec* warm) const {
    const int n = p_.var_count();
    const auto drop = droppable_groups(b);
    std::vector<int> active;
    for (int r = 0; r < static_cast<int>(p_.rows().size()); ++r) {
      const int g = row_group_[r];
      if (g >= 0 && drop[g]) continue;
      if (redundant(r, b)) continue;
      active.push_back(r);
    }

    Vec base(n);
    for (int j = 0; j < n; ++j) {
      if (b.lo[j] == b.hi[j]) {
        base[j] = b.lo[j];
      } else if (p_.type(j) == VarType::Binary) {
        const int g = bin_group_[j];
        if (g >= 0 && drop[g]) {
          int nfree = 0;
          for (int z : p_.groups()[g].binaries) nfree += (b.lo[z] < 0.5 && b.hi[z] > 0.5);
          base[j] = 1.0 / nfree;
        } else {
          base[j] = b.lo[j];
        }
      } else {
        base[j] = std::clamp(0.0, b.lo[j], b.hi[j]);
      }
    }

    std::vector<int> pos(n, -1), kept;
    auto keep = [&](int j) {
      if (pos[j] < 0 && b.lo[j] < b.hi[j]) {
        pos[j] = static_cast<int>(kept.size());
        kept.push_back(j);
      }
    };
    for (int r : active)
      for (const auto& t : p_.rows()[r].terms) keep(t.var);
    for (const auto& t : p_.linear_terms()) keep(t.var);
    for (const auto& q : p_.quad_terms()) {
      keep(q.i);
      keep(q.j);
    }
    const auto nk = static_cast<Eigen::Index>(kept.size());
    const auto na = static_cast<Eigen::Index>(active.size());

    Relaxed out;
    out.values = base;
    double constant = sign_ * p_.objective_constant();
    Vec q = Vec::Zero(nk);
    Mat P = Mat::Zero(nk, nk);
    for (const auto& t : p_.linear_terms()) {
      if (pos[t.var] >= 0)
        q[pos[t.var]] += sign_ * t.coef;
      else
        constant += sign_ * t.coef * base[t.var];
    }
    for (const auto& qt : p_.quad_terms()) {
      const int a = pos[qt.i], c = pos[qt.j];
      if (a >= 0 && c >= 0)
        P(a, c) += qt.value;
      else if (a >= 0)
        q[a] += 0.5 * qt.value * base[qt.j];
      else if (c >= 0)
        q[c] += 0.5 * qt.value * base[qt.i];
      else
        constant += 0.5 * qt.value * base[qt.i] * base[qt.j];
    }
    if (sign_ < 0 && !p_.quad_terms().empty()) throw InvalidArgument("quadratic objective must be minimized");

    QpProblem qp;
    qp.P = P;
    qp.q = q;
    qp.A = Mat::Zero(na + nk, nk);
    qp.l.resize(na + nk);
    qp.u.resize(na + nk);
    for (Eigen::Index i = 0; i < na; ++i) {
      const Row& row = p_.rows()[active[i]];
      double rhs = row.rhs;
      for (const auto& t : row.terms) {
        if (pos[t.var] >= 0)
          qp.A(i, pos[t.var]) += t.coef;
        else
          rhs -= t.coef * base[t.var];
      }
      qp.l[i] = row.rel == Relation::Le ? -kQpBig : rhs;
      qp.u[i] = row.rel == Relation::Ge ? kQpBig : rhs;
    }
    for (Eigen::Index k = 0; k < nk; ++k) {
      qp.A(na + k, k) = 1.0;
      qp.l[na + k] = b.lo[kept[k]];
      qp.u[na + k] = b.hi[kept[k]];
    }

    if (nk == 0) {
      for (Eigen::Index i = 0; i < na; ++i)
        if (0.0 < qp.l[i] - kFeasTol || 0.0 > qp.u[i] + kFeasTol) return out;
      out.feasible = true;
      out.bound = constant;
      return out;
    }

    if (p_.quad_terms().empty()) {
      LpProblem lp;
      lp.c = q;
      lp.A = qp.A.topRows(na);
      lp.row_lo = qp.l.head(na);
      lp.row_hi = qp.u.head(na);
      lp.col_lo = qp.l.tail(nk);
      lp.col_hi = qp.u.tail(nk);
      const LpResult res = solve_lp(lp);
      if (res.status == LpStatus::Infeasible) return out;
      if (res.status == LpStatus::Optimal) {
        for (Eigen::Index k = 0; k < nk; ++k) out.values[kept[k]] = res.x[k];
        out.feasible = true;
        out.bound = constant + res.objective;
        return out;
      }
    }

    Vec x0;
    if (warm) {
      x0.resize(nk);
      for (Eigen::Index k = 0; k < nk; ++k) x0[k] = std::clamp((*warm)[kept[k]], b.lo[kept[k]], b.hi[kept[k]]);
    }
    const QpResult res = solve_qp(qp, qp_, warm ? &x0 : nullptr, nullptr);
    if (res.status == QpStatus::PrimalInfeasible) return out;

    for (Eigen::Index k = 0; k < nk; ++k) out.values[kept[k]] = std::clamp(res.x[k], b.lo[kept[k]], b.hi[kept[k]]);
    out.feasible = true;
    out.bound = constant + dual_bound(qp, res);
    return out;
  }

  // Weak-duality bound from the returned multipliers; the stationarity residual
  // is absorbed into the variable-bound rows so the bound holds for any y.
  static double dual_bound(const QpProblem& qp, const QpResult& res) {
    const auto nk = qp.P.cols();
    const auto m = qp.A.rows();
    const auto na = m - nk;
    Vec y = res.y;
    for (Eigen::Index i = 0; i < na; ++i) {
      if (qp.l[i] <= -kQpBig) y[i] = std::max(y[i], 0.0);
      if (qp.u[i] >= kQpBig) y[i] = std::min(y[i], 0.0);
    }
    const Vec Px = qp.P * res.x;
    const Vec r = Px + qp.q + qp.A.transpose() * y;
    y.tail(nk) -= r;  // bound rows are the identity block
    double d = -0.5 * res.x.dot(Px);
    for (Eigen::Index i = 0; i < m; ++i) d += y[i] > 0 ? -qp.u[i] * y[i] : -qp.l[i] * y[i];
    const double primal = 0.5 * res.x.dot(Px) + qp.q.dot(res.x);
    if (!std::isfinite(d)) return primal - 1e-6 * (1.0 + std::abs(primal));
    return std::min(d, primal);
  }

  // Worst row violation of group member k when its binary is set to 1.
  double member_violation(int g, std::size_t k, const Vec& v) const {
    const auto& grp = p_.groups()[g];
    Vec w = v;
    w[grp.binaries[k]] = 1.0;
    double worst = 0.0;
    for (int r : grp.rows[k]) worst = std::max(worst, p_.row_violation(r, w));
    return worst;
  }

  struct Assessment {
    bool integral = false;
    Vec candidate;
    int branch_group = -1;
    int branch_var = -1;
  };

  Assessment assess(const Bounds& b, const Vec& v) const {
    Assessment a;
    a.candidate = v;
    double worst_group = kFeasTol;
    for (int g = 0; g < static_cast<int>(p_.groups().size()); ++g) {
      const auto& grp = p_.groups()[g];
      int chosen = -1;
      for (std::size_t k = 0; k < grp.binaries.size() && chosen < 0; ++k)
        if (b.lo[grp.binaries[k]] > 0.5) chosen = static_cast<int>(k);
      double best = std::numeric_limits<double>::infinity();
      if (chosen < 0) {
        for (std::size_t k = 0; k < grp.binaries.size(); ++k) {
          if (b.hi[grp.binaries[k]] < 0.5) continue;
          const double viol = member_violation(g, k, v);
          if (viol < best) {
            best = viol;
            chosen = static_cast<int>(k);
          }
        }
        if (best > kFeasTol) {
          if (best > worst_group) {
            worst_group = best;
            a.branch_group = g;
          }
          continue;
        }
      }
      for (std::size_t k = 0; k < grp.binaries.size(); ++k)
        a.candidate[grp.binaries[k]] = static_cast<int>(k) == chosen ? 1.0 : 0.0;
    }
    double most = kIntTol;
    for (int j = 0; j < p_.var_count(); ++j) {
      if (p_.type(j) != VarType::Binary || bin_group_[j] >= 0) continue;
      const double f = std::abs(v[j] - std::round(v[j]));
      if (f > most) {
        most = f;
        a.branch_var = j;
      }
      a.candidate[j] = std::round(v[j]);
    }
    // Plain binaries (activation patterns) first: fixing them makes the LP exact in x.
    if (a.branch_var >= 0) a.branch_group = -1;
    a.integral = a.branch_var < 0 && a.branch_group < 0;
    return a;
  }

  // Fix every binary to `z` (full-length values; only binary entries read) and solve.
  Relaxed fixed_solve(const Vec& z) const {
    Bounds b = root_bounds();
    for (int j = 0; j < p_.var_count(); ++j)
      if (p_.type(j) == VarType::Binary) b.lo[j] = b.hi[j] = std::round(std::clamp(z[j], 0.0, 1.0));
    Relaxed r;
    if (!propagate(b)) return r;
    r = relax(b, &z);
    return r;
  }

  const MilpProblem& p_;
  QpSettings qp_;
  std::vector<std::vector<int>> var_rows_;
  std::vector<int> row_group_, row_member_, bin_group_;
  std::vector<char> in_objective_;
  double sign_ = 1.0;
};

Bounds node_bounds(const Engine& e, const Bounds& root, const Node& node) {
  std::vector<const Node*> path;
  for (const Node* n = &node; n; n = n->parent.get()) path.push_back(n);
  Bounds b = root;
  for (auto it = path.rbegin(); it != path.rend(); ++it)
    for (const auto& [v, lo, hi] : (*it)->changes) {
      b.lo[v] = std::max(b.lo[v], lo);
      b.hi[v] = std::min(b.hi[v], hi);
    }
  (void)e;
  return b;
}

}  // namespace

MilpSolution solve(const MilpProblem& problem, const SolveConfig& cfg) {
  problem.validate();
  Engine eng(problem, cfg.qp);
  const double sgn = eng.sign();
  MilpSolution sol;
  sol.values = Vec::Zero(problem.var_count());

  double incumbent = std::numeric_limits<double>::infinity();
  Vec best;
  const double cutoff = cfg.cutoff ? sgn * *cfg.cutoff : std::numeric_limits<double>::infinity();
  const double target = cfg.target ? sgn * *cfg.target : -std::numeric_limits<double>::infinity();
  auto gap_tol = [&](double inc) { return std::max(cfg.abs_tol, cfg.rel_gap * std::abs(inc)); };
  auto prune_level = [&] { return std::min(cutoff, incumbent - gap_tol(incumbent)); };

  auto offer = [&](const Vec& cand) {
    if (problem.max_violation(cand) > kFeasTol) return false;
    const double f = eng.internal_objective(cand);
    if (f < incumbent && f < cutoff) {
      incumbent = f;
      best = cand;
      for (int j = 0; j < problem.var_count(); ++j)
        if (problem.type(j) == VarType::Binary) best[j] = std::round(best[j]);
      return true;
    }
    return false;
  };
  auto try_repairs = [&](const Vec& v) {
    if (problem.repairs().empty()) return;
    Vec w = v;
    bool any = false;
    for (const auto& fn : problem.repairs()) any = fn(w) || any;
    if (!any) return;
    const Relaxed r = eng.fixed_solve(w);
    if (r.feasible) offer(r.values);
  };

  Bounds root = eng.root_bounds();
  std::priority_queue<std::shared_ptr<const Node>, std::vector<std::shared_ptr<const Node>>, NodeOrder> open;
  long next_id = 0;
  if (eng.propagate(root))
    open.push(std::make_shared<const Node>(Node{nullptr, {}, -std::numeric_limits<double>::infinity(), 0, next_id++, nullptr}));

  bool root_done = false;
  bool hit_target = false;
  long nodes = 0;
  while (!open.empty()) {
    if (nodes >= cfg.node_limit) break;
    auto node = open.top();
    open.pop();
    if (node->bound >= prune_level()) continue;
    ++nodes;

    Bounds b = node_bounds(eng, root, *node);
    const auto obj_row = eng.cutoff_row(prune_level());
    if (!eng.propagate(b, obj_row ? &*obj_row : nullptr)) continue;
    const Relaxed rel = eng.relax(b, node->warm.get());
    if (!root_done) {
      sol.root_bound = rel.feasible ? sgn * rel.bound : sgn * std::numeric_limits<double>::infinity();
      root_done = true;
    }
    if (!rel.feasible) continue;
    const double bound = std::max(rel.bound, node->bound);
    if (bound >= prune_level()) continue;

    const auto as = eng.assess(b, rel.values);
    if (as.integral) {
      if (!offer(as.candidate)) {
        const Relaxed fx = eng.fixed_solve(as.candidate);
        if (fx.feasible) offer(fx.values);
      }
    } else if (nodes <= 50 || nodes % 10 == 0) {
      try_repairs(rel.values);
    }
    if (incumbent < target) {
      hit_target = true;
      break;
    }
    if (as.integral) continue;
    if (bound >= prune_level()) continue;

    auto warm = std::make_shared<const Vec>(rel.values);
    if (as.branch_group >= 0) {
      const auto& grp = problem.groups()[as.branch_group];
      std::vector<std::pair<double, std::size_t>> members;
      for (std::size_t k = 0; k < grp.binaries.size(); ++k)
        if (b.hi[grp.binaries[k]] > 0.5 && b.lo[grp.binaries[k]] < 0.5)
          members.emplace_back(eng.member_violation(as.branch_group, k, rel.values), k);
      std::stable_sort(members.begin(), members.end());
      std::vector<std::tuple<int, double, double>> excluded;
      for (const auto& [viol, k] : members) {
        auto ch = excluded;
        ch.emplace_back(grp.binaries[k], 1.0, 1.0);
        open.push(std::make_shared<const Node>(Node{node, std::move(ch), bound, node->depth + 1, next_id++, warm}));
        excluded.emplace_back(grp.binaries[k], 0.0, 0.0);
      }
    } else {
      const int v = as.branch_var;
      const bool up_first = rel.values[v] >= 0.5;
      for (int side = 0; side < 2; ++side) {
        const double val = (side == 0) == up_first ? 1.0 : 0.0;
        open.push(std::make_shared<const Node>(
            Node{node, {{v, val, val}}, bound, node->depth + 1, next_id++, warm}));
      }
    }
  }

  sol.nodes_explored = nodes;
  double open_bound = std::numeric_limits<double>::infinity();
  const bool exhausted = open.empty();
  while (!open.empty()) {
    if (open.top()->bound < prune_level()) open_bound = std::min(open_bound, open.top()->bound);
    open.pop();
  }
  sol.has_incumbent = std::isfinite(incumbent);
  if (sol.has_incumbent) {
    sol.values = best;
    sol.objective_value = problem.objective(best);
  }
  const double bb = std::min(open_bound, incumbent);
  sol.best_bound = sgn * bb;
  sol.gap = sol.has_incumbent && std::isfinite(bb) ? std::abs(incumbent - bb) : std::numeric_limits<double>::infinity();
  if (hit_target)
    sol.status = SolveStatus::TargetReached;
  else if (exhausted || !std::isfinite(open_bound))
    sol.status = sol.has_incumbent ? SolveStatus::Optimal : SolveStatus::Infeasible;
  else
    sol.status = SolveStatus::NodeLimit;
  if (sol.status == SolveStatus::Optimal) sol.gap = 0.0;
  return sol;
}

MilpSolution solve_fixed(const MilpProblem& problem, const std::vector<int>& binary_values, const QpSettings& qp) {
  Engine eng(problem, qp);
  Vec z = Vec::Zero(problem.var_count());
  std::size_t k = 0;
  for (int j = 0; j < problem.var_count(); ++j)
    if (problem.type(j) == VarType::Binary) {
      if (k >= binary_values.size()) throw DimensionMismatch("binary assignment too short");
      z[j] = binary_values[k++];
    }
  if (k != binary_values.size()) throw DimensionMismatch("binary assignment too long");
  MilpSolution sol;
  sol.nodes_explored = 1;
  const Relaxed r = eng.fixed_solve(z);
  if (!r.feasible || problem.max_violation(r.values) > kFeasTol) {
    sol.status = SolveStatus::Infeasible;
    sol.values = z;
    return sol;
  }
  sol.status = SolveStatus::Optimal;
  sol.has_incumbent = true;
  sol.values = r.values;
  sol.objective_value = problem.objective(r.values);
  sol.best_bound = sol.root_bound = sol.objective_value;
  return sol;
}

}  // namespace deepprae::milp
