#include "deepprae/errors.hpp"
#include "deepprae/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace deepprae {

IdmParams IdmParams::for_gamma(double gamma) {
  IdmParams p;
  p.a = 2.0 * gamma;
  p.d_max = 2.0 * gamma;
  return p;
}

int IdmParams::epochs() const { return static_cast<int>(std::lround(horizon / epoch)); }

void IdmParams::validate() const {
  for (double v : {s0, v0, a, b, d_max, T_headway, delta, L, horizon, epoch, dt_integrate, lv_accel_slope,
                   initial_gap, initial_speed, sigma_u})
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("idm parameters must be positive and finite");
  if (std::abs(horizon / epoch - epochs()) > 1e-9) throw InvalidArgument("idm horizon must be a multiple of the epoch");
}

IdmOutcome idm_simulate(const Vec& u, const IdmParams& p, bool record) {
  p.validate();
  const int ne = p.epochs();
  if (u.size() != ne) throw DimensionMismatch("idm throttle vector must have one entry per epoch");
  if (!u.allFinite()) throw InvalidArgument("idm throttle values must be finite");

  const long steps = std::lround(p.horizon / p.dt_integrate);
  const long per_epoch = std::lround(p.epoch / p.dt_integrate);
  double xf = 0.0, xl = p.initial_gap + p.L, vf = p.initial_speed, vl = p.initial_speed;
  const double sqrt_ab = std::sqrt(p.a * p.b);

  IdmOutcome out;
  out.min_gap = xl - xf - p.L;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * p.dt_integrate;
    const double gap = xl - xf - p.L;
    const int e = static_cast<int>(std::min<long>(k / per_epoch, ne - 1));
    const double al = p.lv_accel_slope * (u[e] - p.u0);
    double af = -p.d_max;
    if (gap > 0.0) {
      // Negative desired gaps (fast-receding leader) are treated as zero.
      const double s_star = std::max(0.0, p.s0 + vf * p.T_headway + vf * (vf - vl) / (2.0 * sqrt_ab));
      const double free = 1.0 - std::pow(vf / p.v0, p.delta);
      af = std::clamp(p.a * (free - (s_star / gap) * (s_star / gap)), -p.d_max, p.a);
    }
    if (!std::isfinite(xf) || !std::isfinite(xl) || !std::isfinite(vf) || !std::isfinite(vl) || !std::isfinite(af))
      throw NonFiniteState("idm state became non-finite at t=" + std::to_string(t));
    out.min_gap = std::min(out.min_gap, gap);
    if (record) out.trajectory.push_back({t, xf, xl, vf, vl, af, al, gap});
    if (gap < 0.0) {
      out.crash = true;
      out.crash_time = t;
      break;
    }
    if (k == steps) break;
    xf += vf * p.dt_integrate;
    xl += vl * p.dt_integrate;
    vf = std::max(0.0, vf + af * p.dt_integrate);
    vl = std::max(0.0, vl + al * p.dt_integrate);
  }
  return out;
}

std::string idm_trajectory_csv(const IdmOutcome& out) {
  std::ostringstream os;
  os.precision(17);
  os << "time,x_follow,x_lead,v_follow,v_lead,a_follow,a_lead,gap\n";
  for (const auto& s : out.trajectory)
    os << s.t << ',' << s.x_follow << ',' << s.x_lead << ',' << s.v_follow << ',' << s.v_lead << ',' << s.a_follow
       << ',' << s.a_lead << ',' << s.gap << '\n';
  return os.str();
}

Vec idm_throttle_from_innovations(const Vec& x, double u0) {
  Vec u(x.size());
  double acc = u0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    acc += x[i];
    u[i] = acc;
  }
  return u;
}

ProblemSpec idm_problem(double gamma, const IdmParams& base) {
  if (!(gamma >= 1.0 && gamma <= 2.0)) throw InvalidArgument("idm gamma must lie in [1, 2]");
  IdmParams params = base;
  params.a = 2.0 * gamma;
  params.d_max = 2.0 * gamma;
  params.validate();
  const int d = params.epochs();

  ProblemSpec p;
  p.name = "idm";
  p.dim = d;
  p.family = GaussianFamily::isotropic(Vec::Zero(d), params.sigma_u * params.sigma_u);
  p.gamma = gamma;
  p.box_M = 12.0 * params.sigma_u;
  // Braking innovations become the increasing direction.
  p.orientation = Orientation{Vec::Constant(d, -1.0), Vec::Constant(d, 0.5 * p.box_M)};
  auto gap = [params](const Vec& x) {
    return idm_simulate(idm_throttle_from_innovations(x, params.u0), params).min_gap;
  };
  p.oracle = [gap](const Vec& x) { return gap(x) < 0.0; };
  p.level = [gap, gamma](const Vec& x) {
    // Crash iff gamma - min_gap > gamma; ties at zero gap are measure zero.
    return gamma - gap(x);
  };
  std::ostringstream os;
  os.precision(10);
  auto put = [&](const char* k, double v) {
    os.str("");
    os << v;
    p.config.emplace_back(k, os.str());
  };
  put("lv_accel_slope", params.lv_accel_slope);
  put("initial_gap", params.initial_gap);
  put("initial_speed", params.initial_speed);
  put("sigma_u", params.sigma_u);
  put("dt", params.dt_integrate);
  put("box_M", p.box_M);
  return p;
}

}  // namespace deepprae
