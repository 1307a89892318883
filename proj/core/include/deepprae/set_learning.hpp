#pragma once

#include "deepprae/common.hpp"
#include "deepprae/milp.hpp"
#include "deepprae/monotone_hull.hpp"
#include "deepprae/relu_net.hpp"

#include <functional>
#include <optional>
#include <span>

namespace deepprae {

struct CalibrationConfig {
  double tol = 1e-4;           // bisection width in logit units
  double margin_tol = 1e-7;    // hull margin that counts as "outside"
  milp::SolveConfig milp = milp::SolveConfig::with_node_limit(20000);
  std::string dump_milp_path;  // when set, the first containment MIP is written here
};

struct ContainmentResult {
  bool contained = false;
  milp::SolveStatus status = milp::SolveStatus::Infeasible;
  long nodes = 0;
  std::optional<Vec> witness;  // a point of the level set outside the hull
};

// Outer: is {x in box : g(x) <= kappa} inside the Lower hull?
ContainmentResult containment_check(const MlpParams& params, double kappa, const MonotoneHull& hull, const Box& box,
                                    const CalibrationConfig& cfg = {});
// Inner: is {x in box : g(x) >= kappa} inside the Upper hull?
ContainmentResult containment_check_inner(const MlpParams& params, double kappa, const MonotoneHull& hull,
                                          const Box& box, const CalibrationConfig& cfg = {});

struct LogitRange {
  double lo;  // <= min_box g
  double hi;  // >= max_box g
};
LogitRange logit_range(const MlpParams& params, const Box& box, const milp::SolveConfig& cfg = {});

// The learned set {g >= kappa_hat} in oriented coordinates.
struct LearnedSet {
  MlpParams params;
  double kappa_hat = 0.0;
  Direction direction = Direction::Outer;
  MonotoneHull hull;
  Box box;
  Orientation orientation;
  bool verified = false;  // containment re-checked at kappa_hat
  int mip_solves = 0;
  long mip_nodes = 0;

  // Membership of an oriented point. Outside the box: Outer counts any coordinate
  // above the box as inside and clamps from below; Inner requires x >= box.lower
  // and clamps from above.
  bool contains(const Vec& y) const;
};

// Largest certified kappa with {g <= kappa} inside H(T0). Samples outside the hull
// (e.g. label-1 points) cap the search from above.
LearnedSet tune_kappa_outer(const MlpParams& params, const MonotoneHull& hull, const Box& box,
                            const Orientation& orientation, const CalibrationConfig& cfg = {},
                            std::span<const LabeledSample> samples = {});
// Smallest certified kappa with {g >= kappa} inside J(T1).
LearnedSet tune_kappa_inner(const MlpParams& params, const MonotoneHull& hull, const Box& box,
                            const Orientation& orientation, const CalibrationConfig& cfg = {},
                            std::span<const LabeledSample> samples = {});

struct DiagnosticRate {
  double rate = 0.0;
  double se = 0.0;
  long n = 0;
};

// Outer: P_q(X in set, X not in S). Inner: P_q(X in S, X not in set).
// Oracle and sampler work in oriented coordinates.
DiagnosticRate conservativeness_diagnostic(const LearnedSet& set, const std::function<bool(const Vec&)>& oracle,
                                           const std::function<Vec(Rng&)>& sampler, long n, Rng& rng);

}  // namespace deepprae
