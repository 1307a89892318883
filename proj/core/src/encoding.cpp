#include "deepprae/encoding.hpp"

#include "deepprae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace deepprae::milp {

namespace {

double widen_down(double v) { return v - 1e-9 * (1.0 + std::abs(v)); }
double widen_up(double v) { return v + 1e-9 * (1.0 + std::abs(v)); }

}  // namespace

ReluEncoding encode_relu_network(const MlpParams& params, const Box& box, MilpProblem& problem,
                                 std::vector<int> inputs) {
  params.validate();
  const int d = params.input_dim();
  if (box.dim() != d) throw DimensionMismatch("encoding box dimension");
  for (int j = 0; j < d; ++j)
    if (!std::isfinite(box.lower[j]) || !std::isfinite(box.upper[j])) throw DomainError("encoding box must be finite");

  ReluEncoding enc;
  enc.bounds = interval_bounds(params, box);
  if (inputs.empty()) {
    for (int j = 0; j < d; ++j) inputs.push_back(problem.add_continuous(box.lower[j], box.upper[j], "x" + std::to_string(j)));
  } else if (static_cast<int>(inputs.size()) != d) {
    throw DimensionMismatch("encoding input variable count");
  }
  enc.input_vars = inputs;

  const auto layers = folded_layers(params);
  std::vector<int> prev = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Mat& W = layers[l].weight;
    const Vec& bias = layers[l].bias;
    const bool last = l + 1 == layers.size();
    std::vector<int> cur;
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      const double L = widen_down(enc.bounds[l].lower[i]);
      const double U = widen_up(enc.bounds[l].upper[i]);
      const std::string tag = std::to_string(l) + "_" + std::to_string(i);
      std::vector<Term> affine;
      for (Eigen::Index k = 0; k < W.cols(); ++k)
        if (W(i, k) != 0.0) affine.push_back({prev[k], -W(i, k)});
      if (last) {
        const int out = problem.add_continuous(L, U, "g");
        auto t = affine;
        t.push_back({out, 1.0});
        enc.rows.push_back(problem.add_row(std::move(t), Relation::Eq, bias[i], "out"));
        enc.output_var = out;
        continue;
      }
      const int z = problem.add_binary("a" + tag);
      enc.neuron_binaries.push_back(z);
      if (U <= 0.0) {
        const int y = problem.add_continuous(0.0, 0.0, "h" + tag);
        problem.set_bounds(z, 0.0, 0.0);
        cur.push_back(y);
      } else if (L >= 0.0) {
        const int y = problem.add_continuous(L, U, "h" + tag);
        problem.set_bounds(z, 1.0, 1.0);
        auto t = affine;
        t.push_back({y, 1.0});
        enc.rows.push_back(problem.add_row(std::move(t), Relation::Eq, bias[i], "on" + tag));
        cur.push_back(y);
      } else {
        const int y = problem.add_continuous(0.0, U, "h" + tag);
        auto lower = affine;
        lower.push_back({y, 1.0});
        enc.rows.push_back(problem.add_row(lower, Relation::Ge, bias[i], "lo" + tag));
        auto upper = affine;
        upper.push_back({y, 1.0});
        upper.push_back({z, -L});
        enc.rows.push_back(problem.add_row(std::move(upper), Relation::Le, bias[i] - L, "up" + tag));
        enc.rows.push_back(problem.add_row({{y, 1.0}, {z, -U}}, Relation::Le, 0.0, "gate" + tag));
        cur.push_back(y);
      }
      enc.neuron_outputs.push_back(cur.back());
    }
    prev = std::move(cur);
  }

  problem.add_repair([layers, enc_in = enc.input_vars, bins = enc.neuron_binaries, outs = enc.neuron_outputs,
                      out = enc.output_var](Vec& v) {
    Vec h(static_cast<Eigen::Index>(enc_in.size()));
    for (std::size_t j = 0; j < enc_in.size(); ++j) h[j] = v[enc_in[j]];
    std::size_t k = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Vec u = layers[l].weight * h + layers[l].bias;
      if (l + 1 == layers.size()) {
        v[out] = u[0];
        break;
      }
      for (Eigen::Index i = 0; i < u.size(); ++i, ++k) {
        v[bins[k]] = u[i] > 0.0 ? 1.0 : 0.0;
        v[outs[k]] = std::max(u[i], 0.0);
      }
      h = u.cwiseMax(0.0);
    }
    return true;
  });
  return enc;
}

HullEncoding encode_hull_noncontainment(const MonotoneHull& hull, const std::vector<int>& input_vars,
                                        const Box& box, MilpProblem& problem) {
  const int d = hull.dim();
  if (static_cast<int>(input_vars.size()) != d || box.dim() != d) throw DimensionMismatch("hull encoding dimension");
  const Mat& F = hull.frontier();
  double M = 0.0;
  for (int j = 0; j < d; ++j) {
    M = std::max({M, std::abs(box.upper[j] - F.col(j).minCoeff()), std::abs(F.col(j).maxCoeff() - box.lower[j])});
  }
  M = std::max(M, 1e-12);
  const double sgn = hull.kind() == HullKind::Lower ? 1.0 : -1.0;

  HullEncoding enc;
  enc.big_m = M;
  enc.beta = problem.add_continuous(-M, M, "beta");
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    IndicatorGroup g;
    std::vector<int> zi;
    std::vector<Term> cover;
    for (int j = 0; j < d; ++j) {
      const int z = problem.add_binary("z" + std::to_string(i) + "_" + std::to_string(j));
      zi.push_back(z);
      cover.push_back({z, 1.0});
      // sgn*(x_j - p_ij) - beta - 4M z >= -4M
      const int r = problem.add_row({{input_vars[j], sgn}, {enc.beta, -1.0}, {z, -4.0 * M}}, Relation::Ge,
                                    sgn * F(i, j) - 4.0 * M, "h" + std::to_string(i) + "_" + std::to_string(j));
      g.binaries.push_back(z);
      g.rows.push_back({r});
    }
    g.cover_row = problem.add_row(std::move(cover), Relation::Ge, 1.0, "cover" + std::to_string(i));
    problem.add_indicator_group(std::move(g));
    enc.z.push_back(std::move(zi));
  }

  problem.add_repair([F, sgn, in = input_vars, z = enc.z, beta = enc.beta, M](Vec& v) {
    double best = M;
    for (Eigen::Index i = 0; i < F.rows(); ++i) {
      int arg = 0;
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < F.cols(); ++j) {
        const double t = sgn * (v[in[j]] - F(i, j));
        if (t > mx) {
          mx = t;
          arg = static_cast<int>(j);
        }
      }
      for (Eigen::Index j = 0; j < F.cols(); ++j) v[z[i][j]] = j == arg ? 1.0 : 0.0;
      best = std::min(best, mx);
    }
    v[beta] = std::clamp(best, -M, M);
    return true;
  });
  return enc;
}

std::vector<int> encode_upper_hull_membership(const MonotoneHull& hull, const std::vector<int>& input_vars,
                                              const Box& box, MilpProblem& problem) {
  if (hull.kind() != HullKind::Upper) throw InvalidArgument("membership encoding needs an Upper hull");
  const int d = hull.dim();
  if (static_cast<int>(input_vars.size()) != d || box.dim() != d) throw DimensionMismatch("hull encoding dimension");
  const Mat& F = hull.frontier();
  std::vector<int> w;
  IndicatorGroup g;
  std::vector<Term> cover;
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    const int b = problem.add_binary("w" + std::to_string(i));
    w.push_back(b);
    cover.push_back({b, 1.0});
    std::vector<int> rows;
    for (int j = 0; j < d; ++j) {
      // x_j - p_ij + Mj (1 - w_i) >= 0
      const double Mj = std::max(0.0, F(i, j) - box.lower[j]);
      if (Mj == 0.0) continue;
      rows.push_back(problem.add_row({{input_vars[j], 1.0}, {b, -Mj}}, Relation::Ge, F(i, j) - Mj,
                                     "m" + std::to_string(i) + "_" + std::to_string(j)));
    }
    g.binaries.push_back(b);
    g.rows.push_back(std::move(rows));
  }
  g.cover_row = problem.add_row(std::move(cover), Relation::Ge, 1.0, "member");
  problem.add_indicator_group(std::move(g));

  problem.add_repair([F, in = input_vars, w](Vec& v) {
    Eigen::Index best = 0;
    double best_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < F.rows(); ++i) {
      double gap = 0.0;
      for (Eigen::Index j = 0; j < F.cols(); ++j) gap = std::max(gap, F(i, j) - v[in[j]]);
      if (gap < best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    for (Eigen::Index i = 0; i < F.rows(); ++i) v[w[i]] = i == best ? 1.0 : 0.0;
    return true;
  });
  return w;
}

}  // namespace deepprae::milp
