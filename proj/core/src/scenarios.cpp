#include "deepprae/scenarios.hpp"

#include "deepprae/errors.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace deepprae {

std::string_view to_string(Symmetry s) {
  switch (s) {
    case Symmetry::None: return "none";
    case Symmetry::FoldedOrthants: return "folded";
    case Symmetry::SplitOrthants: return "split";
  }
  return "none";
}

Symmetry symmetry_from_string(std::string_view s) {
  if (s == "none") return Symmetry::None;
  if (s == "folded") return Symmetry::FoldedOrthants;
  if (s == "split") return Symmetry::SplitOrthants;
  throw InvalidArgument("unknown symmetry mode: " + std::string(s));
}

std::vector<Orientation> ProblemSpec::pieces() const {
  if (symmetry == Symmetry::None) return {orientation};
  if (dim > 20) throw InvalidArgument("orthant enumeration limited to d <= 20");
  std::vector<Orientation> out;
  for (unsigned mask = 0; mask < (1u << dim); ++mask) {
    Orientation o = Orientation::identity(dim);
    for (int j = 0; j < dim; ++j)
      if (mask & (1u << j)) o.signs[j] = -1.0;
    out.push_back(std::move(o));
  }
  return out;
}

const GaussianFamily& ProblemSpec::gaussian() const {
  const auto* g = std::get_if<GaussianFamily>(&family);
  if (!g) throw InvalidArgument(name + ": a Gaussian input family is required");
  return *g;
}

std::string ProblemSpec::config_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < config.size(); ++i) os << (i ? ";" : "") << config[i].first << "=" << config[i].second;
  return os.str();
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

double logistic(double t) { return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

// Two dominant terms give the two dominating points; the small diagonal
// terms bend the boundary between them.
struct SigmoidTerm {
  double theta[2];
  double c[2];
};
constexpr SigmoidTerm kSigmoidTerms[4] = {
    {{2.5, 0.0}, {5.9, 0.0}},
    {{0.0, 2.5}, {0.0, 6.0}},
    {{0.3, 0.3}, {7.0, 7.0}},
    {{0.2, 0.2}, {8.0, 8.0}},
};

double sigmoid_level(const Vec& x, double gamma) {
  double s0 = 0.0, s1 = 0.0;
  for (const auto& t : kSigmoidTerms) {
    s0 += t.theta[0] * logistic(x[0] - t.c[0] - gamma);
    s1 += t.theta[1] * logistic(x[1] - t.c[1] - gamma);
  }
  return std::hypot(s0, s1);
}

}  // namespace

ProblemSpec sigmoid2d(double gamma) {
  if (!(gamma >= 1.0 && gamma <= 2.0)) throw InvalidArgument("sigmoid2d gamma must lie in [1, 2]");
  ProblemSpec p;
  p.name = "sigmoid2d";
  p.dim = 2;
  p.family = GaussianFamily::isotropic(Vec::Constant(2, 5.0), 0.25);
  p.gamma = gamma;
  p.orientation = Orientation::identity(2);
  p.box_M = 12.0;
  p.level = [gamma](const Vec& x) { return sigmoid_level(x, gamma); };
  p.oracle = [gamma](const Vec& x) { return sigmoid_level(x, gamma) > gamma; };
  for (int i = 0; i < 4; ++i) {
    const auto& t = kSigmoidTerms[i];
    p.config.emplace_back("theta" + std::to_string(i + 1), fmt(t.theta[0]) + "/" + fmt(t.theta[1]));
    p.config.emplace_back("c" + std::to_string(i + 1), fmt(t.c[0]) + "/" + fmt(t.c[1]));
  }
  p.config.emplace_back("box_M", fmt(p.box_M));
  return p;
}

double chi_square_sf(double x, int dof) {
  if (dof < 1) throw InvalidArgument("chi-square needs dof >= 1");
  if (x <= 0.0) return 1.0;
  // Closed forms: odd dof start from 2 Phi_bar(sqrt x), even from exp(-x/2).
  const double h = 0.5 * x;
  double sum, term;
  int k;
  if (dof % 2 == 1) {
    const double r = std::sqrt(x);
    sum = 2.0 * normal_sf(r);
    term = std::sqrt(2.0 / std::numbers::pi) * std::exp(-h) * r;  // dof 3 increment
    k = 3;
    while (k <= dof) {
      sum += term;
      term *= x / static_cast<double>(k);
      k += 2;
    }
  } else {
    term = std::exp(-h);
    sum = 0.0;
    k = 2;
    int m = 0;
    while (k <= dof) {
      sum += term;
      ++m;
      term *= h / static_cast<double>(m);
      k += 2;
    }
  }
  return sum;
}

ProblemSpec ball_complement(double gamma, int d) {
  if (!(gamma >= 4.0 && gamma <= 6.0)) throw InvalidArgument("ball gamma must lie in [4, 6]");
  if (d < 1) throw InvalidArgument("ball dimension must be >= 1");
  ProblemSpec p;
  p.name = "ball";
  p.dim = d;
  p.family = GaussianFamily::isotropic(Vec::Zero(d), 0.5);
  p.gamma = gamma;
  p.orientation = Orientation::identity(d);
  p.box_M = gamma + 1.5;
  p.level = [](const Vec& x) { return x.norm(); };
  p.oracle = [gamma](const Vec& x) { return x.norm() >= gamma; };
  p.symmetry = Symmetry::FoldedOrthants;
  p.truth = Truth{chi_square_sf(2.0 * gamma * gamma, d), 0.0, "derived:chi-square survival at 2 gamma^2"};
  p.config.emplace_back("box_M", fmt(p.box_M));
  p.config.emplace_back("features", "abs");
  return p;
}

ProblemSpec random_walk(int T, double sigma, double gamma) {
  if (T < 1) throw InvalidArgument("random walk needs T >= 1");
  if (!(sigma > 0.0)) throw InvalidArgument("random walk sigma must be positive");
  ProblemSpec p;
  p.name = "random_walk";
  p.dim = T;
  p.family = GaussianFamily::isotropic(Vec::Zero(T), sigma * sigma);
  p.gamma = gamma;
  p.box_M = 12.0 * sigma;
  p.orientation = Orientation{Vec::Ones(T), Vec::Constant(T, -0.5 * p.box_M)};
  auto level = [](const Vec& x) {
    double s = 0.0, best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      s += x[i];
      best = std::max(best, s);
    }
    return best;
  };
  p.level = level;
  p.oracle = [gamma, level](const Vec& x) { return level(x) > gamma; };
  p.config.emplace_back("sigma", fmt(sigma));
  p.config.emplace_back("box_M", fmt(p.box_M));
  return p;
}

ProblemSpec peril_1d(double gamma, double k) {
  if (!(k > 0.0 && k < 3.0)) throw InvalidArgument("peril_1d needs 0 < k < 3");
  if (gamma < 0.0) throw InvalidArgument("peril_1d needs gamma >= 0");
  ProblemSpec p;
  p.name = "peril_1d";
  p.dim = 1;
  p.family = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  p.gamma = gamma;
  p.orientation = Orientation::identity(1);
  p.box_M = std::max(1.0, k) * gamma + 4.0;
  p.level = [k](const Vec& x) { return std::max(x[0], -x[0] / k); };
  p.oracle = [gamma, k](const Vec& x) { return x[0] >= gamma || x[0] <= -k * gamma; };
  p.symmetry = Symmetry::SplitOrthants;
  p.truth = Truth{normal_sf(gamma) + normal_sf(k * gamma), 0.0, "derived:sum of normal survivals"};
  p.config.emplace_back("k", fmt(k));
  p.config.emplace_back("box_M", fmt(p.box_M));
  return p;
}

ProblemSpec make_problem(const std::string& name, double gamma, const std::vector<std::pair<std::string, double>>& params) {
  std::map<std::string, double> kv(params.begin(), params.end());
  auto get = [&](const std::string& key, double def) {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    const double v = it->second;
    kv.erase(it);
    return v;
  };
  ProblemSpec p;
  if (name == "sigmoid2d") {
    p = sigmoid2d(gamma);
  } else if (name == "ball") {
    p = ball_complement(gamma, static_cast<int>(get("d", 5)));
    // Raw mode: separate per-orthant classifiers on signed inputs instead of one on |x|.
    if (get("raw", 0) != 0.0) {
      p.symmetry = Symmetry::SplitOrthants;
      p.config.back().second = "raw";
    }
  } else if (name == "random_walk") {
    p = random_walk(static_cast<int>(get("T", 10)), get("sigma", 1.0), gamma);
  } else if (name == "peril_1d") {
    p = peril_1d(gamma, get("k", 0.5));
  } else if (name == "idm") {
    IdmParams base;
    base.sigma_u = get("sigma_u", base.sigma_u);
    base.lv_accel_slope = get("lv_accel_slope", base.lv_accel_slope);
    base.initial_gap = get("initial_gap", base.initial_gap);
    base.initial_speed = get("initial_speed", base.initial_speed);
    base.dt_integrate = get("dt", base.dt_integrate);
    p = idm_problem(gamma, base);
  } else {
    throw InvalidArgument("unknown scenario: " + name);
  }
  if (!kv.empty()) throw InvalidArgument("unknown parameter for " + name + ": " + kv.begin()->first);
  return p;
}

}  // namespace deepprae
