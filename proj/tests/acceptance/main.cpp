// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: deepprae_acceptance [criterion...]   (no arguments runs all ten)

#include "deepprae/dominating_points.hpp"
#include "deepprae/errors.hpp"
#include "deepprae/estimators.hpp"
#include "deepprae/milp.hpp"
#include "deepprae/pipeline.hpp"
#include "deepprae/relu_net.hpp"
#include "deepprae/runner.hpp"
#include "deepprae/scenarios.hpp"
#include "deepprae/set_learning.hpp"

#include "gradcheck.hpp"
#include "milp_instances.hpp"
#include "oracles.hpp"
#include "staircase.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace deepprae;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> clauses;

  void clause(bool ok, const std::string& text) {
    pass = pass && ok;
    clauses.push_back(std::string(ok ? "ok " : "NO ") + text);
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vec v1(double a) { return Vec::Constant(1, a); }

// ---------------------------------------------------------------------------

Outcome peril_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  const double gamma = 3.0, k = 0.5;
  const double right = oracle::normal_tail(gamma);
  const double truth = right + oracle::normal_tail(k * gamma);
  const Family f = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  const auto two = MixtureProposal::uniform(f, {tilt_param(f, v1(gamma)), tilt_param(f, v1(-k * gamma))});
  auto peril = [&](const Vec& x) { return x[0] >= gamma || x[0] <= -k * gamma; };

  int close = 0, close_low_re = 0, mixture_ok = 0;
  std::vector<double> res;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(derive_seed(seed, 1));
    const auto r = peril_single_point_is(gamma, k, 10000, rng);
    if (std::abs(r.estimate / right - 1.0) <= 0.1) {
      ++close;
      res.push_back(r.empirical_re);
      if (r.empirical_re < 0.5) ++close_low_re;
    }
    const auto m = mixture_is(peril, two, 10000, derive_seed(seed, 2));
    if (std::abs(m.estimate / truth - 1.0) <= 0.05) ++mixture_ok;
  }
  std::sort(res.begin(), res.end());
  const double median_re = res.empty() ? 0.0 : res[res.size() / 2];
  // Per-run RE of the right-branch tilt alone: e^{g^2} Phi(-2g) / Phi(-g)^2 - 1.
  const double analytic_re = std::exp(gamma * gamma) * oracle::normal_tail(2.0 * gamma) / (right * right) - 1.0;

  Outcome o;
  o.clause(std::abs(truth / 6.8157e-2 - 1.0) < 1e-4, fmt("truth %.5e", truth));
  o.clause(close >= 45, fmt("single-point within 10%% of %.4e on %d/50 seeds", right, close));
  o.clause(close > 0 && close_low_re == close,
           fmt("single-point RE < 0.5 on %d/%d of those seeds (median %.3g, analytic %.3g)", close_low_re, close,
               median_re, analytic_re));
  o.clause(mixture_ok >= 45, fmt("two-point mixture within 5%% of truth on %d/50 seeds", mixture_ok));
  const double t = seconds_since(t0);
  o.clause(t < 10.0, fmt("runtime %.1f s < 10 s", t));
  return o;
}

// ---------------------------------------------------------------------------

PipelineConfig ball_config() {
  PipelineConfig c;
  c.sampler = Stage1Sampler::AmsHistory;
  c.n1 = 10000;
  c.n2 = 20000;
  c.hidden = {15};
  c.max_frontier = 200;
  c.seed = 1;
  return c;
}

Outcome ball_bracket() {
  const auto t0 = std::chrono::steady_clock::now();
  const double chi = oracle::chi_square_tail(2.0 * 4.75 * 4.75, 5);
  const auto p = ball_complement(4.75);
  Outcome o;
  // Three significant digits of the published value.
  o.clause(fmt("%.2e", chi) == "1.18e-08", fmt("chi-square(5) survival %.4e vs published 1.18e-8", chi));
  o.clause(p.truth && std::abs(p.truth->value / chi - 1.0) < 1e-10, "scenario truth equals the analytic oracle");

  const auto cfg = ball_config();
  const auto data = stage1_samples(p, cfg);
  const auto ub = deep_prae(p, cfg, Direction::Outer, &data);
  const auto lb = deep_prae(p, cfg, Direction::Inner, &data);
  o.clause(ub.report.certified && ub.report.estimate >= chi,
           fmt("certified UB %.4e >= truth (%zu points, RE %.3g)", ub.report.estimate, ub.dominating_points(),
               ub.report.empirical_re));
  o.clause(lb.report.certified && lb.report.estimate <= chi,
           fmt("certified LB %.4e <= truth (%zu points)", lb.report.estimate, lb.dominating_points()));
  o.clause(ub.report.estimate <= 10.0 * chi, fmt("UB <= 10x truth (ratio %.3g)", ub.report.estimate / chi));
  o.clause(lb.report.estimate >= 0.1 * chi, fmt("LB >= 0.1x truth (ratio %.3g)", lb.report.estimate / chi));
  const double t = seconds_since(t0);
  o.clause(t < 600.0, fmt("runtime %.0f s < 600 s", t));
  return o;
}

// ---------------------------------------------------------------------------

Outcome dominating_exactness() {
  Outcome o;
  {
    Vec a(2);
    a << 1.0, 2.0;
    const Family f = GaussianFamily::isotropic(Vec::Zero(2), 1.0);
    const UpperHullRegion region(MonotoneHull(HullKind::Upper, a.transpose()), Box::cube(2, 0.0, 6.0),
                                 Orientation::identity(2));
    const auto dom = search(region, f);
    const double err = dom.points.size() == 1 ? (dom.points[0] - a).lpNorm<Eigen::Infinity>() : INFINITY;
    o.clause(dom.points.size() == 1 && err <= 1e-6,
             fmt("corner {x >= (1,2)}: %zu point(s), error %.2e", dom.points.size(), err));
  }
  {
    const double gamma = 3.0, k = 0.5;
    const Family f = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
    const Box box = Box::cube(1, 0.0, 10.0);
    const UpperHullRegion right(MonotoneHull(HullKind::Upper, Mat::Constant(1, 1, gamma)), box,
                                Orientation::identity(1));
    const UpperHullRegion left(MonotoneHull(HullKind::Upper, Mat::Constant(1, 1, k * gamma)), box,
                               Orientation{v1(-1.0), v1(0.0)});
    std::vector<double> found;
    for (const Region* r : {static_cast<const Region*>(&right), static_cast<const Region*>(&left)}) {
      const auto dom = search(*r, f);
      for (const auto& pt : dom.points) found.push_back(pt[0]);
    }
    std::sort(found.begin(), found.end());
    const bool ok = found.size() == 2 && std::abs(found[0] + k * gamma) <= 1e-6 && std::abs(found[1] - gamma) <= 1e-6;
    std::string list;
    for (double v : found) list += fmt("%.8g ", v);
    o.clause(ok, "two-ray geometry points { " + list + "}");
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome mip_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  int milp_ok = 0, net_ok = 0;
  double worst = 0.0;
  auto agree = [&](const milp::MilpProblem& p) {
    const auto s = milp::solve(p);
    const auto ref = testsupport::enumerate_optimum(p);
    if (!ref) return s.status == milp::SolveStatus::Infeasible;
    if (s.status != milp::SolveStatus::Optimal) return false;
    const double gap = std::abs(s.objective_value - *ref);
    worst = std::max(worst, gap);
    return gap <= 1e-4;
  };
  for (std::uint64_t seed = 1000; seed < 1100; ++seed) milp_ok += agree(testsupport::random_milp(seed, seed % 2 == 1));
  for (std::uint64_t seed = 2000; seed < 2100; ++seed) net_ok += agree(testsupport::random_tiny_net(seed).problem);
  Outcome o;
  o.clause(milp_ok == 100, fmt("random MILP/MIQP instances matching enumeration %d/100", milp_ok));
  o.clause(net_ok == 100, fmt("tiny ReLU nets matching enumeration %d/100", net_ok));
  o.clause(true, fmt("largest optimum gap %.2e", worst));
  const double t = seconds_since(t0);
  o.clause(t < 120.0, fmt("runtime %.1f s < 120 s", t));
  return o;
}

// ---------------------------------------------------------------------------

Outcome zero_false_negatives() {
  Outcome o;
  const double M = 10.0;
  int stage1_viol = 0, fresh_viol = 0, unverified = 0;
  long fresh_checked = 0;
  const int dims[] = {2, 3, 5};
  for (int i = 0; i < 25; ++i) {
    const int d = dims[i % 3];
    Rng rng(derive_seed(500, static_cast<std::uint64_t>(i)));
    const auto stair = testsupport::Staircase::random(d, 3 + i % 4, M, rng);
    std::uniform_real_distribution<double> u(0.0, M);
    auto draw = [&](Rng& r) {
      Vec x(d);
      for (int j = 0; j < d; ++j) x[j] = u(r);
      return x;
    };
    std::vector<LabeledSample> samples;
    for (int n = 0; n < 1000; ++n) {
      const Vec x = draw(rng);
      samples.push_back({x, stair.rare(x) ? 1 : 0});
    }
    TrainConfig tc;
    tc.epochs = 60;
    tc.seed = static_cast<std::uint64_t>(i);
    const auto params = train(samples, MlpSpec{d, {8}}, tc);
    const auto hull = build_hull(samples, HullKind::Lower);
    const auto set = tune_kappa_outer(params, hull, Box::cube(d, 0.0, M), Orientation::identity(d), {}, samples);
    unverified += !set.verified;
    for (const auto& s : samples)
      if (s.label == 1 && !set.contains(s.point)) ++stage1_viol;
    for (int n = 0; n < 10000; ++n) {
      const Vec x = draw(rng);
      if (stair.rare(x) && !hull.contains(x)) {
        ++fresh_checked;
        if (!set.contains(x)) ++fresh_viol;
      }
    }
  }
  o.clause(stage1_viol == 0, fmt("label-1 Stage-1 samples outside the learned set: %d", stage1_viol));
  o.clause(fresh_viol == 0,
           fmt("fresh label-1 points outside H(T0) but outside the learned set: %d of %ld", fresh_viol, fresh_checked));
  o.clause(true, fmt("thresholds left at the conservative fallback: %d/25", unverified));
  return o;
}

// ---------------------------------------------------------------------------

Outcome change_of_measure() {
  Outcome o;
  const long n = 1000000;
  auto check = [&](const char* name, const Oracle& in, const MixtureProposal& prop, double truth, std::uint64_t seed) {
    const auto r = mixture_is(in, prop, n, seed);
    const double z = (r.estimate - truth) / r.standard_error();
    o.clause(std::abs(z) <= 3.0, fmt("%s: estimate %.5e truth %.5e (%.2f SE)", name, r.estimate, truth, z));
  };
  const Family normal = GaussianFamily::isotropic(Vec::Zero(1), 1.0);
  check("normal x>=3, one tilt", [](const Vec& x) { return x[0] >= 3.0; },
        MixtureProposal::uniform(normal, {tilt_param(normal, v1(3.0))}), oracle::normal_tail(3.0), 11);
  check("normal two-sided, two tilts", [](const Vec& x) { return x[0] >= 3.0 || x[0] <= -1.5; },
        MixtureProposal::uniform(normal, {tilt_param(normal, v1(3.0)), tilt_param(normal, v1(-1.5))}),
        oracle::normal_tail(3.0) + oracle::normal_tail(1.5), 12);
  const Family gamma = GammaFamily(2.0, 1.0);
  check("gamma(2,1) x>=8, one tilt", [](const Vec& x) { return x[0] >= 8.0; },
        MixtureProposal::uniform(gamma, {tilt_param(gamma, v1(8.0))}), oracle::gamma_tail(8.0, 2.0, 1.0), 13);
  check("gamma(2,1) x>=8, two tilts", [](const Vec& x) { return x[0] >= 8.0; },
        MixtureProposal::uniform(gamma, {tilt_param(gamma, v1(8.0)), tilt_param(gamma, v1(5.0))}),
        oracle::gamma_tail(8.0, 2.0, 1.0), 14);
  return o;
}

// ---------------------------------------------------------------------------

PipelineConfig rw_config() {
  PipelineConfig c;
  c.sampler = Stage1Sampler::AmsHistory;
  c.n1 = 10000;
  c.n2 = 20000;
  c.hidden = {15};
  c.max_frontier = 200;
  c.seed = 1;
  return c;
}

struct McOracle {
  double estimate = 0.0;
  double se = 0.0;
  bool cached = false;
};

McOracle rw_oracle(const ProblemSpec& p) {
  const long n = 10000000;
  const std::uint64_t seed = 20240;
  const fs::path cache = fs::path(DEEPPRAE_ACCEPTANCE_CACHE) / "rw_T10_s1_g5_naive.txt";
  const std::string key = fmt("naive n=%ld seed=%llu %s", n, static_cast<unsigned long long>(seed),
                              p.config_string().c_str());
  {
    std::ifstream in(cache);
    std::string line;
    McOracle m;
    if (std::getline(in, line) && line == key && in >> m.estimate >> m.se) {
      m.cached = true;
      return m;
    }
  }
  Rng rng(seed);
  const auto r = naive_mc(p.oracle, p.family, n, rng);
  fs::create_directories(cache.parent_path());
  std::ofstream out(cache);
  out.precision(17);
  out << key << "\n" << r.estimate << " " << r.standard_error() << "\n";
  return {r.estimate, r.standard_error(), false};
}

Outcome random_walk_bracket() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = random_walk(10, 1.0, 5.0);
  const auto mc = rw_oracle(p);
  const auto cfg = rw_config();
  const auto data = stage1_samples(p, cfg);
  const auto ub = deep_prae(p, cfg, Direction::Outer, &data);
  const auto lb = deep_prae(p, cfg, Direction::Inner, &data);
  Outcome o;
  o.clause(true, fmt("naive MC oracle %.5e +- %.2e%s", mc.estimate, mc.se, mc.cached ? " (cached)" : ""));
  o.clause(ub.report.estimate >= mc.estimate - 2.0 * mc.se,
           fmt("UB %.5e >= oracle - 2 SE (%zu points, RE %.3g)", ub.report.estimate, ub.dominating_points(),
               ub.report.empirical_re));
  o.clause(lb.report.estimate <= mc.estimate + 2.0 * mc.se,
           fmt("LB %.5e <= oracle + 2 SE (%zu points)", lb.report.estimate, lb.dominating_points()));
  const double t = seconds_since(t0);
  o.clause(t < 900.0, fmt("runtime %.0f s < 900 s", t));
  return o;
}

// ---------------------------------------------------------------------------

// sha256 of the recorded trajectory CSV for innovations alternating -2, +1.
constexpr const char* kIdmGoldenHash = "516c13963471445faeb6b84d380ef7dc579fb9a7297b742565f1b0c59147a2c8";

Outcome idm_structure() {
  Outcome o;
  const auto params = IdmParams::for_gamma(1.0);
  Vec x(params.epochs());
  for (int i = 0; i < x.size(); ++i) x[i] = i % 2 == 0 ? -2.0 : 1.0;
  auto hash = [&] {
    return sha256_hex(idm_trajectory_csv(idm_simulate(idm_throttle_from_innovations(x, params.u0), params, true)));
  };
  const auto h1 = hash(), h2 = hash();
  o.clause(h1 == h2 && h1 == kIdmGoldenHash, "golden trajectory hash " + h1);

  // Dominated pairs y <= y' in oriented coordinates, box-uniform, mapped back.
  const auto p = idm_problem(1.0);
  const auto o1 = p.pieces().front();
  Rng rng(808);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0, rare_lower = 0;
  for (int i = 0; i < 1000; ++i) {
    Vec y(p.dim), y2(p.dim);
    for (int j = 0; j < p.dim; ++j) {
      y[j] = p.box_M * u(rng);
      y2[j] = y[j] + (p.box_M - y[j]) * u(rng) * (u(rng) < 0.5 ? 1.0 : 0.0);
    }
    if (p.oracle(o1.inverse(y))) {
      ++rare_lower;
      if (!p.oracle(o1.inverse(y2))) ++violations;
    }
  }
  o.clause(violations == 0,
           fmt("dominated-pair probes violating crash monotonicity: %d of 1000 (%d with a crashing lower point)",
               violations, rare_lower));

  // Widely scaled input draws, so that the gamma=2 crash set is hit often.
  const auto p2 = idm_problem(2.0);
  Rng r2(909);
  int nest = 0, crash2 = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec z = sample(p.family, r2) * 8.0;
    const bool c2 = p2.oracle(z);
    crash2 += c2;
    if (c2 && !p.oracle(z)) ++nest;
  }
  o.clause(nest == 0, fmt("gamma=2 crashes outside the gamma=1 crash set: %d of 1000 (%d gamma=2 crashes)", nest, crash2));
  return o;
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  Rng rng(31);
  std::normal_distribution<double> nd;
  MlpParams p = zero_params(MlpSpec{2, {8}});
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = nd(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.3 * nd(rng);
  }
  std::vector<LabeledSample> batch;
  for (int i = 0; i < 5; ++i) {
    Vec x(2);
    x << nd(rng), nd(rng);
    batch.push_back({x, i % 2});
  }
  const auto gc = testsupport::gradient_check(p, batch, 1.5);
  Outcome o;
  o.clause(gc.parameters == 33, fmt("parameters checked %ld", gc.parameters));
  o.clause(gc.max_rel_error <= 1e-4, fmt("max relative error %.2e <= 1e-4", gc.max_rel_error));
  return o;
}

// ---------------------------------------------------------------------------

Outcome lazy_vs_deep() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = load_manifest(std::string(DEEPPRAE_SOURCE_DIR) + "/manifests/example1.json");
  const fs::path root = fs::path(DEEPPRAE_ACCEPTANCE_CACHE) / "example1_run";
  fs::remove_all(root);
  RunOptions opt;
  opt.output_root = root.string();
  const auto sum = run_manifest(m, opt);

  std::map<std::uint64_t, const LedgerRow*> deep, lazy;
  for (const auto& r : sum.rows) {
    if (r.direction != "upper") continue;
    if (r.method == "deep") deep[r.seed] = &r;
    if (r.method == "lazy") lazy[r.seed] = &r;
  }
  Outcome o;
  o.clause(sum.failed == 0 && deep.size() == 5 && lazy.size() == 5,
           fmt("manifest ran %d rows, %d failed, %zu deep/%zu lazy upper seeds", sum.runs, sum.failed, deep.size(),
               lazy.size()));
  int more_points = 0, larger_ub = 0;
  for (const auto& [seed, d] : deep) {
    const auto it = lazy.find(seed);
    if (it == lazy.end()) continue;
    const auto* l = it->second;
    more_points += l->points > d->points;
    larger_ub += l->estimate >= d->estimate;
    o.clauses.push_back(fmt("   seed %llu: deep UB %.4e (%ld pts), lazy UB %.4e (%ld pts)",
                            static_cast<unsigned long long>(seed), d->estimate, d->points, l->estimate, l->points));
  }
  o.clause(more_points == 5, fmt("lazy point count > deep point count in %d/5 seeds", more_points));
  o.clause(larger_ub == 5, fmt("lazy UB >= deep UB in %d/5 seeds", larger_ub));
  o.clause(true, fmt("runtime %.0f s", seconds_since(t0)));
  return o;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  const std::vector<Criterion> all = {
      {1, "peril reproduction", peril_reproduction},
      {2, "ball truth and bracket", ball_bracket},
      {3, "dominating-point exactness", dominating_exactness},
      {4, "MIP oracle equivalence", mip_equivalence},
      {5, "zero-false-negative calibration", zero_false_negatives},
      {6, "change-of-measure unbiasedness", change_of_measure},
      {7, "random-walk bracket", random_walk_bracket},
      {8, "IDM determinism and monotonicity", idm_structure},
      {9, "gradient check", gradient_check},
      {10, "lazy-vs-deep ordering", lazy_vs_deep},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.clause(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::printf("criterion %2d %s: %s (%.1f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.title, seconds_since(t0));
    for (const auto& line : o.clauses) std::printf("    %s\n", line.c_str());
  }
  return failed == 0 ? 0 : 1;
}
