#pragma once

#include "deepprae/distributions.hpp"
#include "deepprae/milp.hpp"
#include "deepprae/monotone_hull.hpp"
#include "deepprae/set_learning.hpp"

#include <memory>
#include <string>
#include <vector>

namespace deepprae {

// A rare-event set approximation in oriented coordinates, encodable as MIP constraints.
class Region {
 public:
  virtual ~Region() = default;
  virtual const Box& box() const = 0;
  virtual const Orientation& orientation() const = 0;
  virtual bool contains(const Vec& y) const = 0;
  // Adds "y in region" constraints over the given input variables.
  virtual void encode(milp::MilpProblem& p, const std::vector<int>& y_vars) const = 0;
  int dim() const { return box().dim(); }
  bool contains_original(const Vec& x) const { return contains(orientation().apply(x)); }
};

// {g >= kappa_hat}
class LearnedRegion final : public Region {
 public:
  explicit LearnedRegion(LearnedSet set) : set_(std::move(set)) {}
  const Box& box() const override { return set_.box; }
  const Orientation& orientation() const override { return set_.orientation; }
  bool contains(const Vec& y) const override { return set_.contains(y); }
  void encode(milp::MilpProblem& p, const std::vector<int>& y_vars) const override;
  const LearnedSet& set() const { return set_; }

 private:
  LearnedSet set_;
};

// Lower hull complement H(T0)^c, the lazy outer set; encoded with beta >= eps.
class HullComplementRegion final : public Region {
 public:
  HullComplementRegion(MonotoneHull hull, Box box, Orientation o, double eps = 1e-6);
  const Box& box() const override { return box_; }
  const Orientation& orientation() const override { return orient_; }
  bool contains(const Vec& y) const override { return hull_.margin(y) > 0.0; }
  void encode(milp::MilpProblem& p, const std::vector<int>& y_vars) const override;
  const MonotoneHull& hull() const { return hull_; }

 private:
  MonotoneHull hull_;
  Box box_;
  Orientation orient_;
  double eps_;
};

// Upper hull J(T1), the lazy inner set. {x >= a} is the one-point case.
class UpperHullRegion final : public Region {
 public:
  UpperHullRegion(MonotoneHull hull, Box box, Orientation o);
  const Box& box() const override { return box_; }
  const Orientation& orientation() const override { return orient_; }
  bool contains(const Vec& y) const override { return hull_.contains(y); }
  void encode(milp::MilpProblem& p, const std::vector<int>& y_vars) const override;
  const MonotoneHull& hull() const { return hull_; }

 private:
  MonotoneHull hull_;
  Box box_;
  Orientation orient_;
};

enum class ResidualStatus { Covered, NodeLimitUncovered };
std::string_view to_string(ResidualStatus s);

struct DominatingSet {
  std::vector<Vec> points;  // original coordinates
  std::vector<TiltComponent> tilts;
  std::vector<double> rates;
  ResidualStatus status = ResidualStatus::Covered;
  long mip_nodes = 0;
};

struct SearchConfig {
  std::size_t max_points = 512;
  double eps_cut = 1e-6;  // cut offset, relative to |s|
  milp::SolveConfig milp = milp::SolveConfig::with_node_limit(20000);
  std::string dump_milp_path;  // first search MIP, LP format
};

// Sequential cutting-plane search. Gaussian families only.
DominatingSet search(const Region& region, const Family& family, const SearchConfig& cfg = {});

// True iff no point of the region (within its box) escapes every cut.
bool verify_coverage(const DominatingSet& dom, const Region& region, const Family& family,
                     const SearchConfig& cfg = {});

// order,rate,a1..ad,s1..sd
std::string dominating_set_to_csv(const DominatingSet& dom);

}  // namespace deepprae
