#pragma once

#include "deepprae/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace deepprae {

struct Orientation {
  Vec signs;
  Vec offset;

  static Orientation identity(int dim);
  int dim() const { return static_cast<int>(signs.size()); }
  Vec apply(const Vec& x) const;
  Vec inverse(const Vec& y) const;
};

Vec orient(const Vec& x, const Orientation& o);

struct LabeledSample {
  Vec point;
  int label = 0;
};

enum class HullKind { Lower, Upper };

struct HullOptions {
  // Keep at most this many frontier points (largest rectangle, then farthest-point order); 0 = unlimited.
  std::size_t max_frontier = 0;
  // Upper corner of the box; needed to rank Upper-hull rectangles when thinning.
  std::optional<Vec> box_upper;
};

class MonotoneHull {
 public:
  MonotoneHull(HullKind kind, Mat frontier);

  HullKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(frontier_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(frontier_.rows()); }
  const Mat& frontier() const { return frontier_; }
  Vec point(std::size_t i) const { return frontier_.row(static_cast<Eigen::Index>(i)).transpose(); }

  bool contains(const Vec& x) const;
  // Lower: min_i max_j (x_j - p_ij); Upper: min_i max_j (p_ij - x_j).
  // Positive exactly when x lies outside the hull.
  double margin(const Vec& x) const;

 private:
  HullKind kind_;
  Mat frontier_;
};

MonotoneHull build_hull(std::span<const LabeledSample> samples, HullKind kind, const HullOptions& opts = {});
bool hull_contains(const MonotoneHull& hull, const Vec& x);

// Pareto reduction of a point set: maxima (Lower) or minima (Upper). Ties count as domination.
Mat pareto_frontier(const std::vector<Vec>& points, HullKind kind);

std::string hull_to_csv(const MonotoneHull& hull);
MonotoneHull hull_from_csv(const std::string& text, HullKind kind);

}  // namespace deepprae
