#include "deepprae/dominating_points.hpp"

#include "deepprae/encoding.hpp"
#include "deepprae/errors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace deepprae {

using milp::MilpProblem;
using milp::Relation;
using milp::SolveStatus;

void LearnedRegion::encode(MilpProblem& p, const std::vector<int>& y_vars) const {
  const auto enc = milp::encode_relu_network(set_.params, set_.box, p, y_vars);
  p.add_row({{enc.output_var, 1.0}}, Relation::Ge, set_.kappa_hat, "learned");
}

HullComplementRegion::HullComplementRegion(MonotoneHull hull, Box box, Orientation o, double eps)
    : hull_(std::move(hull)), box_(std::move(box)), orient_(std::move(o)), eps_(eps) {
  if (hull_.kind() != HullKind::Lower) throw InvalidArgument("hull complement needs a Lower hull");
}

void HullComplementRegion::encode(MilpProblem& p, const std::vector<int>& y_vars) const {
  const auto h = milp::encode_hull_noncontainment(hull_, y_vars, box_, p);
  p.set_bounds(h.beta, eps_, p.upper(h.beta));
}

UpperHullRegion::UpperHullRegion(MonotoneHull hull, Box box, Orientation o)
    : hull_(std::move(hull)), box_(std::move(box)), orient_(std::move(o)) {
  if (hull_.kind() != HullKind::Upper) throw InvalidArgument("upper hull region needs an Upper hull");
}

void UpperHullRegion::encode(MilpProblem& p, const std::vector<int>& y_vars) const {
  milp::encode_upper_hull_membership(hull_, y_vars, box_, p);
}

std::string_view to_string(ResidualStatus s) {
  return s == ResidualStatus::Covered ? "covered" : "node_limit_uncovered";
}

namespace {

const GaussianFamily& gaussian(const Family& f) {
  const auto* g = std::get_if<GaussianFamily>(&f);
  if (!g) throw InvalidArgument("dominating-point search needs a Gaussian family");
  return *g;
}

struct SearchProblem {
  MilpProblem p;
  std::vector<int> y;
};

// min I(S y + offset) over the region's box and membership constraints, plus cuts.
SearchProblem build(const Region& region, const GaussianFamily& g, const std::vector<TiltComponent>& cuts,
                    double eps_cut) {
  const int d = region.dim();
  if (g.dim() != d) throw DimensionMismatch("family and region dimensions differ");
  const auto& o = region.orientation();
  const Box& box = region.box();
  SearchProblem sp;
  for (int j = 0; j < d; ++j) sp.y.push_back(sp.p.add_continuous(box.lower[j], box.upper[j], "y" + std::to_string(j)));
  region.encode(sp.p, sp.y);

  // I = 1/2 y'(S K S)y + y'S K (offset - m) + const, K = covariance^{-1}
  const Mat K = g.precision();
  const Vec r = o.offset - g.mean();
  const Vec Kr = K * r;
  std::vector<milp::QuadTerm> quad;
  std::vector<milp::Term> lin;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double v = o.signs[i] * K(i, j) * o.signs[j];
      if (v != 0.0) quad.push_back({sp.y[i], sp.y[j], v});
    }
    lin.push_back({sp.y[i], o.signs[i] * Kr[i]});
  }
  sp.p.set_quadratic_objective(std::move(quad), std::move(lin), 0.5 * r.dot(Kr));

  int k = 0;
  for (const auto& c : cuts) {
    // s'(S y + offset - a) <= -eps |s|
    std::vector<milp::Term> t;
    for (int j = 0; j < d; ++j)
      if (c.tilt[j] != 0.0) t.push_back({sp.y[j], c.tilt[j] * o.signs[j]});
    const double rhs = c.tilt.dot(c.anchor - o.offset) - eps_cut * c.tilt.norm();
    if (t.empty()) {
      // zero tilt: the anchor is the mean and its halfspace is everything
      sp.p.add_row({{sp.y[0], 0.0}}, Relation::Le, -1.0, "cut" + std::to_string(k++));
      continue;
    }
    sp.p.add_row(std::move(t), Relation::Le, rhs, "cut" + std::to_string(k++));
  }
  return sp;
}

}  // namespace

DominatingSet search(const Region& region, const Family& family, const SearchConfig& cfg) {
  const auto& g = gaussian(family);
  DominatingSet dom;
  bool dumped = false, degraded = false;
  while (true) {
    if (dom.points.size() >= cfg.max_points) {
      dom.status = ResidualStatus::NodeLimitUncovered;
      return dom;
    }
    auto sp = build(region, g, dom.tilts, cfg.eps_cut);
    if (!dumped && !cfg.dump_milp_path.empty()) {
      std::ofstream out(cfg.dump_milp_path);
      if (!out) throw IoError("cannot write milp dump: " + cfg.dump_milp_path);
      out << sp.p.to_lp();
      dumped = true;
    }
    const auto sol = milp::solve(sp.p, cfg.milp);
    dom.mip_nodes += sol.nodes_explored;
    if (sol.status == SolveStatus::Infeasible) {
      dom.status = degraded ? ResidualStatus::NodeLimitUncovered : ResidualStatus::Covered;
      return dom;
    }
    if (!sol.has_incumbent) {
      dom.status = ResidualStatus::NodeLimitUncovered;
      return dom;
    }
    Vec y(region.dim());
    for (int j = 0; j < region.dim(); ++j) y[j] = sol.values[sp.y[j]];
    const Vec a = region.orientation().inverse(y);
    dom.tilts.push_back(tilt_param(family, a));
    dom.points.push_back(a);
    dom.rates.push_back(rate(family, a));
    // A node-limited incumbent is still a valid anchor, just not a certified minimizer.
    if (sol.status != SolveStatus::Optimal) degraded = true;
  }
}

bool verify_coverage(const DominatingSet& dom, const Region& region, const Family& family, const SearchConfig& cfg) {
  const auto& g = gaussian(family);
  auto sp = build(region, g, dom.tilts, cfg.eps_cut);
  return milp::solve(sp.p, cfg.milp).status == SolveStatus::Infeasible;
}

std::string dominating_set_to_csv(const DominatingSet& dom) {
  std::ostringstream os;
  os.precision(17);
  const std::size_t d = dom.points.empty() ? 0 : static_cast<std::size_t>(dom.points.front().size());
  os << "order,rate";
  for (std::size_t j = 1; j <= d; ++j) os << ",a" << j;
  for (std::size_t j = 1; j <= d; ++j) os << ",s" << j;
  os << '\n';
  for (std::size_t k = 0; k < dom.points.size(); ++k) {
    os << k + 1 << ',' << dom.rates[k];
    for (std::size_t j = 0; j < d; ++j) os << ',' << dom.points[k][j];
    for (std::size_t j = 0; j < d; ++j) os << ',' << dom.tilts[k].tilt[j];
    os << '\n';
  }
  return os.str();
}

}  // namespace deepprae
