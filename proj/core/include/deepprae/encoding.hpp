#pragma once

#include "deepprae/milp.hpp"
#include "deepprae/monotone_hull.hpp"
#include "deepprae/relu_net.hpp"

#include <vector>

namespace deepprae::milp {

struct ReluEncoding {
  std::vector<int> input_vars;
  int output_var = -1;
  std::vector<int> neuron_binaries;  // one per hidden neuron, layer-major
  std::vector<int> neuron_outputs;   // post-activation variables, same order
  std::vector<int> rows;
  std::vector<Interval> bounds;      // pre-activation intervals used for big-M
};

// Big-M encoding of the network over `box`. Neuron constants come from interval
// propagation; provably dead/active neurons get their binary fixed and no big-M rows.
// Pass existing input variables in `inputs`, or leave empty to create them on the box.
// Also registers a repair hook that completes a relaxed point by a forward pass.
ReluEncoding encode_relu_network(const MlpParams& params, const Box& box, MilpProblem& problem,
                                 std::vector<int> inputs = {});

struct HullEncoding {
  int beta = -1;
  std::vector<std::vector<int>> z;  // z[i][j]
  double big_m = 0.0;
};

// beta <= max_j (x_j - p_ij) for every frontier point (Lower hull), or
// beta <= max_j (p_ij - x_j) (Upper hull). beta > 0 iff x is outside the hull.
// Rows: x_j - p_ij + 4M(1 - z_ij) >= beta, sum_j z_ij >= 1.
HullEncoding encode_hull_noncontainment(const MonotoneHull& hull, const std::vector<int>& input_vars,
                                        const Box& box, MilpProblem& problem);

// x >= p_i for some frontier point (Upper hull membership), one binary per point.
std::vector<int> encode_upper_hull_membership(const MonotoneHull& hull, const std::vector<int>& input_vars,
                                              const Box& box, MilpProblem& problem);

}  // namespace deepprae::milp
