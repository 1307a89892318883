#include "deepprae/monotone_hull.hpp"

#include "deepprae/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace deepprae {

Orientation Orientation::identity(int dim) { return Orientation{Vec::Ones(dim), Vec::Zero(dim)}; }

Vec Orientation::apply(const Vec& x) const {
  if (x.size() != signs.size() || offset.size() != signs.size()) throw DimensionMismatch("orientation dimension");
  return signs.cwiseProduct(x - offset);
}

Vec Orientation::inverse(const Vec& y) const {
  if (y.size() != signs.size() || offset.size() != signs.size()) throw DimensionMismatch("orientation dimension");
  return signs.cwiseProduct(y) + offset;
}

Vec orient(const Vec& x, const Orientation& o) { return o.apply(x); }

namespace {

// p "covers" q when q lies in the rectangle generated by p.
bool covers(const double* p, const double* q, int d, HullKind kind) {
  if (kind == HullKind::Lower) {
    for (int j = 0; j < d; ++j)
      if (q[j] > p[j]) return false;
  } else {
    for (int j = 0; j < d; ++j)
      if (q[j] < p[j]) return false;
  }
  return true;
}

}  // namespace

MonotoneHull::MonotoneHull(HullKind kind, Mat frontier) : kind_(kind), frontier_(std::move(frontier)) {
  if (frontier_.rows() == 0) throw EmptyLabelClass("hull needs at least one frontier point");
  if (!frontier_.allFinite()) throw DomainError("hull frontier must be finite");
}

bool MonotoneHull::contains(const Vec& x) const {
  if (x.size() != frontier_.cols()) throw DimensionMismatch("hull membership dimension");
  const int d = dim();
  for (Eigen::Index i = 0; i < frontier_.rows(); ++i) {
    bool inside = true;
    for (int j = 0; j < d && inside; ++j)
      inside = kind_ == HullKind::Lower ? x[j] <= frontier_(i, j) : x[j] >= frontier_(i, j);
    if (inside) return true;
  }
  return false;
}

double MonotoneHull::margin(const Vec& x) const {
  if (x.size() != frontier_.cols()) throw DimensionMismatch("hull margin dimension");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < frontier_.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < dim(); ++j)
      m = std::max(m, kind_ == HullKind::Lower ? x[j] - frontier_(i, j) : frontier_(i, j) - x[j]);
    best = std::min(best, m);
  }
  return best;
}

Mat pareto_frontier(const std::vector<Vec>& points, HullKind kind) {
  if (points.empty()) return Mat(0, 0);
  const int d = static_cast<int>(points.front().size());
  std::vector<double> key(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != d) throw DimensionMismatch("hull sample dimension");
    key[i] = kind == HullKind::Lower ? -points[i].sum() : points[i].sum();
  }
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return key[a] < key[b]; });

  // A point can only be covered by one that precedes it in this order.
  std::vector<double> kept;
  std::size_t count = 0;
  for (auto i : order) {
    const double* q = points[i].data();
    bool dominated = false;
    for (std::size_t k = 0; k < count && !dominated; ++k) dominated = covers(&kept[k * d], q, d, kind);
    if (!dominated) {
      kept.insert(kept.end(), q, q + d);
      ++count;
    }
  }
  Mat out(count, d);
  for (std::size_t k = 0; k < count; ++k)
    for (int j = 0; j < d; ++j) out(k, j) = kept[k * d + j];
  return out;
}

MonotoneHull build_hull(std::span<const LabeledSample> samples, HullKind kind, const HullOptions& opts) {
  const int want = kind == HullKind::Lower ? 0 : 1;
  std::vector<Vec> pts;
  for (const auto& s : samples) {
    if (!s.point.allFinite()) throw DomainError("hull sample must be finite");
    if (s.label == want) pts.push_back(s.point);
  }
  if (pts.empty())
    throw EmptyLabelClass(kind == HullKind::Lower ? "no label-0 samples for the lower hull"
                                                  : "no label-1 samples for the upper hull");
  Mat front = pareto_frontier(pts, kind);

  if (opts.max_frontier > 0 && static_cast<std::size_t>(front.rows()) > opts.max_frontier) {
    if (kind == HullKind::Upper && !opts.box_upper) throw InvalidArgument("upper-hull thinning needs box_upper");
    std::vector<double> logvol(front.rows());
    for (Eigen::Index i = 0; i < front.rows(); ++i) {
      double v = 0.0;
      for (Eigen::Index j = 0; j < front.cols(); ++j) {
        const double side = kind == HullKind::Lower ? front(i, j) : (*opts.box_upper)[j] - front(i, j);
        v += std::log(std::max(side, 1e-300));
      }
      logvol[i] = v;
    }
    // Start from the largest rectangle, then repeatedly add the frontier point
    // farthest from those kept, so the kept corners spread along the boundary.
    const Eigen::Index n = front.rows();
    std::vector<Eigen::Index> idx{static_cast<Eigen::Index>(std::max_element(logvol.begin(), logvol.end()) - logvol.begin())};
    std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    while (idx.size() < opts.max_frontier) {
      const auto last = front.row(idx.back());
      Eigen::Index best = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        dist[i] = std::min(dist[i], (front.row(i) - last).squaredNorm());
        if (dist[i] > dist[best]) best = i;
      }
      idx.push_back(best);
    }
    std::sort(idx.begin(), idx.end());
    Mat thin(opts.max_frontier, front.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) thin.row(k) = front.row(idx[k]);
    front = std::move(thin);
  }
  return MonotoneHull(kind, std::move(front));
}

bool hull_contains(const MonotoneHull& hull, const Vec& x) { return hull.contains(x); }

std::string hull_to_csv(const MonotoneHull& hull) {
  std::ostringstream os;
  os.precision(17);
  for (int j = 0; j < hull.dim(); ++j) os << (j ? "," : "") << 'x' << (j + 1);
  os << '\n';
  for (Eigen::Index i = 0; i < hull.frontier().rows(); ++i) {
    for (int j = 0; j < hull.dim(); ++j) os << (j ? "," : "") << hull.frontier()(i, j);
    os << '\n';
  }
  return os.str();
}

MonotoneHull hull_from_csv(const std::string& text, HullKind kind) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw TruncatedStream("hull csv: missing header");
  const auto d = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<double> vals;
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    Eigen::Index n = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigParse("hull csv: bad number '" + cell + "'");
      }
      ++n;
    }
    if (n != d) throw ConfigParse("hull csv: row has wrong column count");
    ++rows;
  }
  Mat f(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < d; ++j) f(i, j) = vals[i * d + j];
  return MonotoneHull(kind, std::move(f));
}

}  // namespace deepprae
