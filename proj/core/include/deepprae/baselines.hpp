#pragma once

#include "deepprae/distributions.hpp"
#include "deepprae/estimators.hpp"

#include <vector>

namespace deepprae {

enum class CeKind { SingleGaussian, Gmm };

struct CeConfig {
  CeKind kind = CeKind::SingleGaussian;
  int components = 1;  // Gmm only
  double rho = 0.1;    // elite fraction
  int iterations_max = 50;
  long n_per_iter = 2000;
  long n_final = 10000;
  double smoothing = 0.7;
  int em_iterations = 50;
  double cov_floor = 1e-6;

  void validate() const;
};

struct CeResult {
  GmmFamily proposal;
  EstimateReport report;
  std::vector<double> levels;
  bool reached = false;          // some iteration used the target level itself
  bool degenerate_elite = false; // covariance floor was needed
  // Every point drawn during the adaptive iterations, with its score.
  std::vector<Vec> trace;
  std::vector<double> trace_scores;
};

// Event {g(x) >= gamma} under a Gaussian input law. When `event` is set, the
// final IS indicator uses it instead, while g still drives the adaptive levels.
CeResult cross_entropy(const LevelFn& g, double gamma, const GaussianFamily& family, const CeConfig& cfg, Rng& rng,
                       bool keep_trace = false, const Oracle& event = {});

// Weighted EM for a k-component Gaussian mixture (k-means++ seeding).
GmmFamily fit_gmm_weighted(const std::vector<Vec>& x, const std::vector<double>& w, int k, int iterations,
                           double cov_floor, Rng& rng);

struct AmsConfig {
  long n_particles = 1000;
  double kill_fraction = 0.1;
  int mh_steps = 10;
  double proposal_std = 0.3;  // multiple of each coordinate's marginal std
  int max_levels = 5000;
  int stall_rounds = 3;

  void validate() const;
};

struct AmsResult {
  EstimateReport report;
  std::vector<double> levels;
  // Every evaluated point (initial particles and MH proposals) with its score.
  std::vector<Vec> history;
  std::vector<double> history_scores;
};

// Product of level survival fractions times the final hit fraction. The
// reported RE is the standard asymptotic per-particle value
// K (1 - p0) / p0 + (1 - r) / r, with second_moment = estimate^2 (1 + RE).
AmsResult ams(const LevelFn& g, double gamma, const GaussianFamily& family, const AmsConfig& cfg, Rng& rng,
              bool keep_history = false);

}  // namespace deepprae
