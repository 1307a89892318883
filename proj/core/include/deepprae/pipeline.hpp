#pragma once

#include "deepprae/baselines.hpp"
#include "deepprae/dominating_points.hpp"
#include "deepprae/estimators.hpp"
#include "deepprae/relu_net.hpp"
#include "deepprae/scenarios.hpp"
#include "deepprae/set_learning.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace deepprae {

enum class Stage1Sampler { UniformBox, CeTrace, AmsHistory };
std::string_view to_string(Stage1Sampler s);
Stage1Sampler stage1_sampler_from_string(std::string_view s);

struct PipelineConfig {
  Stage1Sampler sampler = Stage1Sampler::UniformBox;
  long n1 = 10000;
  long n2 = 20000;
  std::vector<int> hidden{15};
  TrainConfig train;
  CalibrationConfig calibration;
  SearchConfig search;
  std::size_t max_frontier = 0;  // hull thinning; 0 keeps every frontier point
  CeConfig ce;
  AmsConfig ams;
  int workers = 1;
  std::uint64_t seed = 0;
  // Pre-trained classifiers, one per learning piece; trained from the data when empty.
  std::vector<MlpParams> models;
};

// Labeled Stage-1 samples in original coordinates.
struct Stage1Data {
  std::vector<Vec> x;
  std::vector<int> labels;
  long n0() const;
  long n1() const;
};

Stage1Data stage1_samples(const ProblemSpec& problem, const PipelineConfig& cfg);

struct PieceResult {
  Orientation orientation;
  std::optional<MonotoneHull> hull;
  std::optional<LearnedSet> set;  // deep only
  DominatingSet dom;
  bool skipped = false;  // Inner piece without label-1 samples: contributes nothing
};

struct PipelineResult {
  std::string method;  // "deep" or "lazy"
  EstimateReport report;
  std::vector<PieceResult> pieces;
  std::vector<Vec> anchors;         // all mixture anchors, original coordinates
  std::vector<double> orthant_estimates;  // contribution of each orthant (one entry without symmetry)
  long n_label0 = 0;
  long n_label1 = 0;
  double stage1_time = 0.0;
  double stage2_time = 0.0;

  std::size_t dominating_points() const { return anchors.size(); }
};

// Classifier-based outer (Outer) or inner (Inner) approximation followed by
// mixture IS over the learned set. Reuses `data` when given.
PipelineResult deep_prae(const ProblemSpec& problem, const PipelineConfig& cfg, Direction direction,
                         const Stage1Data* data = nullptr);
// Hull complement (Outer) or upper hull (Inner) used directly as the set.
PipelineResult lazy_prae(const ProblemSpec& problem, const PipelineConfig& cfg, Direction direction,
                         const Stage1Data* data = nullptr);

}  // namespace deepprae
