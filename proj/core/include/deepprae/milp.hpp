#pragma once

#include "deepprae/common.hpp"
#include "deepprae/qp.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace deepprae::milp {

enum class VarType { Continuous, Binary };
enum class Relation { Le, Eq, Ge };
enum class Sense { Min, Max };
// TargetReached: stopped early with an incumbent better than SolveConfig::target.
enum class SolveStatus { Optimal, Infeasible, NodeLimit, TargetReached };

std::string_view to_string(SolveStatus s);

struct Term {
  int var;
  double coef;
};

struct Row {
  std::vector<Term> terms;
  Relation rel;
  double rhs;
  std::string name;
};

// Disjunction "some member k has z_k = 1, and z_k = 1 enforces rows[k]".
// The rows are big-M rows that must be slack whenever z_k = 0.
struct IndicatorGroup {
  std::vector<int> binaries;
  std::vector<std::vector<int>> rows;
  int cover_row = -1;  // sum_k z_k >= 1
};

// Heuristic completion of a relaxed point: set binaries (and any dependent
// variables) to a consistent integral assignment. Returns false to decline.
using RepairFn = std::function<bool(Vec& values)>;

struct QuadTerm {
  int i;
  int j;
  double value;  // contributes 1/2 * value * x_i * x_j (store both (i,j) and (j,i))
};

class MilpProblem {
 public:
  int add_continuous(double lo, double hi, std::string name = {});
  int add_binary(std::string name = {});
  int add_row(std::vector<Term> terms, Relation rel, double rhs, std::string name = {});
  void add_indicator_group(IndicatorGroup g);
  void add_repair(RepairFn fn) { repairs_.push_back(std::move(fn)); }
  void set_bounds(int var, double lo, double hi);

  void set_linear_objective(std::vector<Term> c, Sense sense, double constant = 0.0);
  // Minimize 1/2 x'Qx + c'x + constant; Q must be PSD.
  void set_quadratic_objective(std::vector<QuadTerm> q, std::vector<Term> c, double constant = 0.0);

  int var_count() const { return static_cast<int>(type_.size()); }
  int n_cont() const;
  int n_bin() const;
  VarType type(int v) const { return type_[v]; }
  double lower(int v) const { return lo_[v]; }
  double upper(int v) const { return hi_[v]; }
  const std::string& name(int v) const { return names_[v]; }
  const std::vector<Row>& rows() const { return rows_; }
  const std::vector<IndicatorGroup>& groups() const { return groups_; }
  const std::vector<RepairFn>& repairs() const { return repairs_; }
  Sense sense() const { return sense_; }
  bool quadratic() const { return !quad_.empty(); }
  const std::vector<QuadTerm>& quad_terms() const { return quad_; }
  const std::vector<Term>& linear_terms() const { return lin_; }
  double objective_constant() const { return constant_; }

  double objective(const Vec& values) const;
  double row_activity(int r, const Vec& values) const;
  double row_violation(int r, const Vec& values) const;
  double max_violation(const Vec& values) const;
  // Checks that Q is PSD (Cholesky of Q + 1e-12 I on the touched block).
  void validate() const;

  // CPLEX-LP style text, for cross-checking with external solvers.
  std::string to_lp() const;

 private:
  std::vector<VarType> type_;
  std::vector<double> lo_, hi_;
  std::vector<std::string> names_;
  std::vector<Row> rows_;
  std::vector<IndicatorGroup> groups_;
  std::vector<RepairFn> repairs_;
  std::vector<QuadTerm> quad_;
  std::vector<Term> lin_;
  double constant_ = 0.0;
  Sense sense_ = Sense::Min;
};

struct SolveConfig {
  long node_limit = 200000;
  double abs_tol = 1e-6;
  double rel_gap = 1e-6;
  // Only solutions strictly better than this value are wanted (problem sense).
  std::optional<double> cutoff;
  // Stop as soon as an incumbent strictly better than this is found.
  std::optional<double> target;
  QpSettings qp;

  static SolveConfig with_node_limit(long n) {
    SolveConfig c;
    c.node_limit = n;
    return c;
  }
};

struct MilpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  Vec values;  // all variables, in index order; binaries exactly 0/1
  double objective_value = 0.0;
  double best_bound = 0.0;
  double root_bound = 0.0;
  long nodes_explored = 0;
  double gap = 0.0;
  bool has_incumbent = false;

  Vec continuous(const MilpProblem& p) const;
  std::vector<int> binaries(const MilpProblem& p) const;
};

MilpSolution solve(const MilpProblem& problem, const SolveConfig& cfg = {});

// Solve the continuous problem with every binary fixed to the given 0/1 values
// (indexed by binary order). Status Optimal or Infeasible.
MilpSolution solve_fixed(const MilpProblem& problem, const std::vector<int>& binary_values,
                         const QpSettings& qp = {});

}  // namespace deepprae::milp
