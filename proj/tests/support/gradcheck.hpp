#pragma once

#include "deepprae/relu_net.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace testsupport {

struct GradCheck {
  double max_rel_error = 0.0;
  long parameters = 0;
};

// Backprop vs central differences over every weight and bias.
// Relative error |a - b| / max(|a|, |b|, floor).
inline GradCheck gradient_check(const deepprae::MlpParams& params, std::span<const deepprae::LabeledSample> batch,
                                double pos_weight, double h = 1e-6, double floor = 1e-6) {
  using namespace deepprae;
  std::vector<DenseLayer> grad;
  loss_and_gradient(params, batch, pos_weight, &grad);
  GradCheck out;
  MlpParams p = params;
  auto probe = [&](double& slot, double analytic) {
    const double keep = slot;
    slot = keep + h;
    const double up = loss_and_gradient(p, batch, pos_weight, nullptr);
    slot = keep - h;
    const double down = loss_and_gradient(p, batch, pos_weight, nullptr);
    slot = keep;
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), floor});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.parameters;
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < p.layers[l].weight.rows(); ++i)
      for (Eigen::Index j = 0; j < p.layers[l].weight.cols(); ++j) probe(p.layers[l].weight(i, j), grad[l].weight(i, j));
    for (Eigen::Index i = 0; i < p.layers[l].bias.size(); ++i) probe(p.layers[l].bias[i], grad[l].bias[i]);
  }
  return out;
}

}  // namespace testsupport
