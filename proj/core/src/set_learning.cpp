#include "deepprae/set_learning.hpp"

#include "deepprae/encoding.hpp"
#include "deepprae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace deepprae {

namespace {

using milp::MilpProblem;
using milp::Relation;
using milp::Sense;
using milp::SolveStatus;

void maybe_dump(const MilpProblem& p, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write milp dump: " + path);
  out << p.to_lp();
}

ContainmentResult check(const MlpParams& params, double kappa, const MonotoneHull& hull, const Box& box,
                        const CalibrationConfig& cfg, Relation rel) {
  MilpProblem p;
  const auto enc = milp::encode_relu_network(params, box, p);
  const auto h = milp::encode_hull_noncontainment(hull, enc.input_vars, box, p);
  p.add_row({{enc.output_var, 1.0}}, rel, kappa, "level");
  p.set_linear_objective({{h.beta, 1.0}}, Sense::Max);
  maybe_dump(p, cfg.dump_milp_path);

  auto sc = cfg.milp;
  sc.cutoff = cfg.margin_tol;
  sc.target = cfg.margin_tol;
  const auto sol = milp::solve(p, sc);

  ContainmentResult r;
  r.status = sol.status;
  r.nodes = sol.nodes_explored;
  r.contained = sol.status == SolveStatus::Infeasible;
  if (sol.has_incumbent) {
    Vec w(box.dim());
    for (int j = 0; j < box.dim(); ++j)
      w[j] = std::clamp(sol.values[enc.input_vars[j]], box.lower[j], box.upper[j]);
    r.witness = w;
  }
  return r;
}

// Sample mapped to the point whose logit decides its membership, or nullopt when
// the sample is decided without the classifier (see LearnedSet::contains).
std::optional<Vec> decisive_point(const Vec& x, const Box& box, Direction dir) {
  if (dir == Direction::Outer) {
    if ((x.array() > box.upper.array()).any()) return std::nullopt;
    return Vec(x.cwiseMax(box.lower));
  }
  if ((x.array() < box.lower.array()).any()) return std::nullopt;
  return Vec(x.cwiseMin(box.upper));
}

}  // namespace

ContainmentResult containment_check(const MlpParams& params, double kappa, const MonotoneHull& hull, const Box& box,
                                    const CalibrationConfig& cfg) {
  if (hull.kind() != HullKind::Lower) throw InvalidArgument("outer containment needs a Lower hull");
  return check(params, kappa, hull, box, cfg, Relation::Le);
}

ContainmentResult containment_check_inner(const MlpParams& params, double kappa, const MonotoneHull& hull,
                                          const Box& box, const CalibrationConfig& cfg) {
  if (hull.kind() != HullKind::Upper) throw InvalidArgument("inner containment needs an Upper hull");
  return check(params, kappa, hull, box, cfg, Relation::Ge);
}

LogitRange logit_range(const MlpParams& params, const Box& box, const milp::SolveConfig& cfg) {
  LogitRange out{};
  for (Sense sense : {Sense::Min, Sense::Max}) {
    MilpProblem p;
    const auto enc = milp::encode_relu_network(params, box, p);
    p.set_linear_objective({{enc.output_var, 1.0}}, sense);
    const auto sol = milp::solve(p, cfg);
    if (sol.status == SolveStatus::Infeasible) throw ConvergenceError("logit range MIP infeasible over a non-empty box");
    const double b = sol.best_bound;
    (sense == Sense::Min ? out.lo : out.hi) = b;
  }
  return out;
}

bool LearnedSet::contains(const Vec& y) const {
  if (y.size() != box.dim()) throw DimensionMismatch("learned set membership dimension");
  if (direction == Direction::Outer) {
    if ((y.array() > box.upper.array()).any()) return true;
    return logit(params, y.cwiseMax(box.lower)) >= kappa_hat;
  }
  if ((y.array() < box.lower.array()).any()) return false;
  return logit(params, y.cwiseMin(box.upper)) >= kappa_hat;
}

LearnedSet tune_kappa_outer(const MlpParams& params, const MonotoneHull& hull, const Box& box,
                            const Orientation& orientation, const CalibrationConfig& cfg,
                            std::span<const LabeledSample> samples) {
  LearnedSet set{params, 0.0, Direction::Outer, hull, box, orientation};
  const auto range = logit_range(params, box, cfg.milp);
  set.mip_solves += 2;
  auto run = [&](double k) {
    auto r = containment_check(params, k, hull, box, cfg);
    ++set.mip_solves;
    set.mip_nodes += r.nodes;
    return r;
  };

  // Strictly below the minimum: the sublevel set is empty.
  double lo = range.lo - cfg.tol, hi = range.hi;
  bool hi_from_sample = false;
  for (const auto& s : samples) {
    const auto y = decisive_point(s.point, box, Direction::Outer);
    if (y && hull.margin(*y) > cfg.margin_tol) {
      const double g = logit(params, *y);
      if (g < hi) {
        hi = g;
        hi_from_sample = true;
      }
    }
  }
  if (!run(lo).contained) throw CalibrationImpossible("learned sublevel set escapes the hull even at the minimum logit");
  if (hi <= lo) {
    set.kappa_hat = lo;
  } else if (!hi_from_sample && run(hi).contained) {
    set.kappa_hat = hi;
  } else {
    while (hi - lo > cfg.tol) {
      const double mid = 0.5 * (lo + hi);
      const auto r = run(mid);
      if (r.contained) {
        lo = mid;
      } else {
        hi = mid;
        if (r.witness) hi = std::max(lo, std::min(hi, logit(params, *r.witness)));
      }
    }
    set.kappa_hat = lo;
  }
  set.verified = run(set.kappa_hat).contained;
  return set;
}

LearnedSet tune_kappa_inner(const MlpParams& params, const MonotoneHull& hull, const Box& box,
                            const Orientation& orientation, const CalibrationConfig& cfg,
                            std::span<const LabeledSample> samples) {
  LearnedSet set{params, 0.0, Direction::Inner, hull, box, orientation};
  const auto range = logit_range(params, box, cfg.milp);
  set.mip_solves += 2;
  auto run = [&](double k) {
    auto r = containment_check_inner(params, k, hull, box, cfg);
    ++set.mip_solves;
    set.mip_nodes += r.nodes;
    return r;
  };

  // Strictly above the maximum: the superlevel set is empty.
  double lo = range.lo, hi = range.hi + cfg.tol;
  bool lo_from_sample = false;
  for (const auto& s : samples) {
    const auto y = decisive_point(s.point, box, Direction::Inner);
    if (y && hull.margin(*y) > cfg.margin_tol) {
      const double g = logit(params, *y);
      if (g > lo) {
        lo = g;
        lo_from_sample = true;
      }
    }
  }
  if (!run(hi).contained) throw CalibrationImpossible("learned superlevel set escapes the hull even at the maximum logit");
  if (lo >= hi) {
    set.kappa_hat = hi;
  } else if (!lo_from_sample && run(lo).contained) {
    set.kappa_hat = lo;
  } else {
    while (hi - lo > cfg.tol) {
      const double mid = 0.5 * (lo + hi);
      const auto r = run(mid);
      if (r.contained) {
        hi = mid;
      } else {
        lo = mid;
        if (r.witness) lo = std::min(hi, std::max(lo, logit(params, *r.witness)));
      }
    }
    set.kappa_hat = hi;
  }
  set.verified = run(set.kappa_hat).contained;
  return set;
}

DiagnosticRate conservativeness_diagnostic(const LearnedSet& set, const std::function<bool(const Vec&)>& oracle,
                                           const std::function<Vec(Rng&)>& sampler, long n, Rng& rng) {
  if (n < 1) throw InvalidArgument("diagnostic needs n >= 1");
  long bad = 0;
  for (long i = 0; i < n; ++i) {
    const Vec y = sampler(rng);
    const bool in_set = set.contains(y);
    const bool in_s = oracle(y);
    if (set.direction == Direction::Outer ? (in_set && !in_s) : (in_s && !in_set)) ++bad;
  }
  DiagnosticRate d;
  d.n = n;
  d.rate = static_cast<double>(bad) / static_cast<double>(n);
  d.se = std::sqrt(d.rate * (1.0 - d.rate) / static_cast<double>(n));
  return d;
}

}  // namespace deepprae
