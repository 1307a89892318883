#pragma once

#include "deepprae/common.hpp"
#include "deepprae/distributions.hpp"
#include "deepprae/estimators.hpp"
#include "deepprae/monotone_hull.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace deepprae {

// How the monotone structure is exposed to the pipeline.
//  None: one piece, the problem orientation maps the set to an upper set on [0, M]^d.
//  FoldedOrthants: the set is an upper set in |x|; one learned set on |x| serves all 2^d orthants.
//  SplitOrthants: each orthant gets its own learned set in sign-flipped coordinates.
enum class Symmetry { None, FoldedOrthants, SplitOrthants };
std::string_view to_string(Symmetry s);
Symmetry symmetry_from_string(std::string_view s);

struct Truth {
  double value = 0.0;
  double standard_error = 0.0;  // nonzero for Monte Carlo references
  std::string tag;              // provenance, e.g. "derived:chi-square survival"
};

struct ProblemSpec {
  std::string name;
  int dim = 0;
  Family family = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  double gamma = 0.0;
  Orientation orientation;
  double box_M = 0.0;
  Oracle oracle;  // original coordinates
  // Score with {level >= gamma} equal to the rare set up to its boundary; used by CE and AMS.
  LevelFn level;
  Symmetry symmetry = Symmetry::None;
  std::optional<Truth> truth;
  // Free parameters chosen in this repository; printed with every result.
  std::vector<std::pair<std::string, std::string>> config;

  Box box() const { return Box::cube(dim, 0.0, box_M); }
  // Orientations of the pieces (a single one for Symmetry::None).
  std::vector<Orientation> pieces() const;
  const GaussianFamily& gaussian() const;
  std::string config_string() const;
};

// ||sum_i theta_i * psi(x - c_i - gamma)|| > gamma, X ~ N([5,5], 0.25 I).
ProblemSpec sigmoid2d(double gamma);
// ||x|| >= gamma, X ~ N(0, 0.5 I_d).
ProblemSpec ball_complement(double gamma, int d = 5);
// max_t sum_{i<=t} x_i > gamma, X ~ N(0, sigma^2 I_T).
ProblemSpec random_walk(int T, double sigma, double gamma);
// X >= gamma or X <= -k gamma, X ~ N(0, 1).
ProblemSpec peril_1d(double gamma, double k);

// Chi-square survival function for odd or even integer degrees of freedom.
double chi_square_sf(double x, int dof);

struct IdmParams {
  double s0 = 2.0;
  double v0 = 30.0;
  double a = 2.0;      // 2 gamma
  double b = 1.67;
  double d_max = 2.0;  // 2 gamma
  double T_headway = 1.5;
  double delta = 4.0;
  double L = 4.0;
  double horizon = 60.0;
  double epoch = 4.0;
  double u0 = 10.0;
  double dt_integrate = 0.1;
  // Choices not fixed by the model description.
  double lv_accel_slope = 0.4;  // LV acceleration = slope * (u - u0)
  double initial_gap = 20.0;
  double initial_speed = 20.0;
  double sigma_u = 1.5;

  static IdmParams for_gamma(double gamma);
  int epochs() const;
  void validate() const;
};

struct IdmStep {
  double t, x_follow, x_lead, v_follow, v_lead, a_follow, a_lead, gap;
};

struct IdmOutcome {
  bool crash = false;
  double min_gap = 0.0;
  double crash_time = -1.0;
  std::vector<IdmStep> trajectory;  // filled on request
};

// u: per-epoch LV throttle values.
IdmOutcome idm_simulate(const Vec& u, const IdmParams& params, bool record = false);
std::string idm_trajectory_csv(const IdmOutcome& out);

// Innovation coordinates: u_e = u0 + sum_{s<=e} x_s.
Vec idm_throttle_from_innovations(const Vec& x, double u0);
ProblemSpec idm_problem(double gamma, const IdmParams& base = {});

// Name-based construction ("sigmoid2d", "ball", "random_walk", "peril_1d", "idm").
ProblemSpec make_problem(const std::string& name, double gamma, const std::vector<std::pair<std::string, double>>& params = {});

}  // namespace deepprae
