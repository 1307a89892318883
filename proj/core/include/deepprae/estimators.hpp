#pragma once

#include "deepprae/common.hpp"
#include "deepprae/distributions.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace deepprae {

enum class BoundKind { Upper, Lower, Point };
std::string_view to_string(BoundKind b);
BoundKind bound_kind_from_string(std::string_view s);

using Oracle = std::function<bool(const Vec&)>;
using LevelFn = std::function<double(const Vec&)>;

struct EstimateReport {
  double estimate = 0.0;
  double second_moment = 0.0;  // mean of Z^2
  double empirical_re = 0.0;   // (m2 - m1^2) / m1^2, 0 when there are no hits
  long n_used = 0;
  BoundKind direction = BoundKind::Point;
  bool certified = false;
  long hits = 0;
  bool zero_hit = false;
  bool stalled = false;  // AMS only
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  // Relative accuracy / confidence the certificate is quoted for.
  double epsilon = 0.1;
  double delta = 0.05;
  std::string note;

  double standard_error() const;
  // Sample size for relative accuracy epsilon with confidence 1 - delta (Chebyshev).
  double required_n() const;
};

// Moments of the per-run outputs Z_i, pairwise-summed.
EstimateReport summarize(std::span<const double> z, BoundKind direction);

EstimateReport naive_mc(const Oracle& oracle, const Family& family, long n, Rng& rng);

// (1/n) sum L(X_i) 1(X_i in set), X_i from the proposal. Draws are split into
// `workers` contiguous blocks with independent streams seeded from `seed`; the
// result depends on (seed, workers) only.
EstimateReport mixture_is(const Oracle& in_set, const MixtureProposal& proposal, long n, std::uint64_t seed,
                          int workers = 1, BoundKind direction = BoundKind::Point);

// Per-draw outputs of mixture_is, in draw order (for per-piece breakdowns).
std::vector<double> mixture_is_terms(const Oracle& in_set, const MixtureProposal& proposal, long n,
                                     std::uint64_t seed, int workers, std::vector<Vec>* draws = nullptr);

// X ~ N(gamma, 1), Z = 1(X >= gamma or X <= -k gamma) exp(-gamma X + gamma^2 / 2).
EstimateReport peril_single_point_is(double gamma, double k, long n, Rng& rng);

std::string report_to_json(const EstimateReport& r);

// Seed for block `index` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace deepprae
