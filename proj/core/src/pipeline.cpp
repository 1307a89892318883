#include "deepprae/pipeline.hpp"

#include "deepprae/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace deepprae {

std::string_view to_string(Stage1Sampler s) {
  switch (s) {
    case Stage1Sampler::UniformBox: return "uniform";
    case Stage1Sampler::CeTrace: return "ce";
    case Stage1Sampler::AmsHistory: return "ams";
  }
  return "uniform";
}

Stage1Sampler stage1_sampler_from_string(std::string_view s) {
  if (s == "uniform") return Stage1Sampler::UniformBox;
  if (s == "ce") return Stage1Sampler::CeTrace;
  if (s == "ams") return Stage1Sampler::AmsHistory;
  throw InvalidArgument("unknown stage-1 sampler: " + std::string(s));
}

long Stage1Data::n0() const { return static_cast<long>(std::count(labels.begin(), labels.end(), 0)); }
long Stage1Data::n1() const { return static_cast<long>(std::count(labels.begin(), labels.end(), 1)); }

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Stream indices for derive_seed.
enum : std::uint64_t { kStage1Stream = 1, kTrainStream = 2, kStage2Stream = 3 };

std::vector<Vec> take_last(const std::vector<Vec>& pool, long n) {
  const auto k = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(n));
  return {pool.end() - static_cast<std::ptrdiff_t>(k), pool.end()};
}

Vec uniform_point(const ProblemSpec& p, Rng& rng) {
  const double M = p.box_M;
  Vec y(p.dim);
  if (p.symmetry == Symmetry::None) {
    std::uniform_real_distribution<double> u(0.0, M);
    for (int j = 0; j < p.dim; ++j) y[j] = u(rng);
    return p.orientation.inverse(y);
  }
  std::uniform_real_distribution<double> u(-M, M);
  for (int j = 0; j < p.dim; ++j) y[j] = u(rng);
  return y;
}

// Oriented coordinates of x for one piece, or nullopt when x lies in another orthant.
std::optional<Vec> piece_coords(const ProblemSpec& p, const Orientation& o, const Vec& x) {
  if (p.symmetry == Symmetry::FoldedOrthants) return Vec(x.cwiseAbs());
  const Vec y = o.apply(x);
  if (p.symmetry == Symmetry::SplitOrthants && (y.array() < 0.0).any()) return std::nullopt;
  return y;
}

std::vector<Orientation> learning_pieces(const ProblemSpec& p) {
  if (p.symmetry == Symmetry::FoldedOrthants) return {Orientation::identity(p.dim)};
  return p.pieces();
}

int orthant_index(const Vec& x) {
  int idx = 0;
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (x[j] < 0.0) idx |= 1 << j;
  return idx;
}

struct PieceData {
  std::vector<LabeledSample> all;  // oriented, unclamped
  std::vector<LabeledSample> lower_hull, upper_hull, train;
};

PieceData piece_data(const ProblemSpec& p, const Orientation& o, const Stage1Data& data) {
  const Box box = p.box();
  PieceData out;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const auto y = piece_coords(p, o, data.x[i]);
    if (!y) continue;
    const int label = data.labels[i];
    out.all.push_back({*y, label});
    out.train.push_back({y->cwiseMax(box.lower).cwiseMin(box.upper), label});
    // Clamping toward the anchor keeps a label-0 point non-rare, and clamping
    // away from it keeps a label-1 point rare; the other direction is dropped.
    if (label == 0 && (y->array() >= box.lower.array()).all())
      out.lower_hull.push_back({y->cwiseMin(box.upper), 0});
    if (label == 1 && (y->array() <= box.upper.array()).all())
      out.upper_hull.push_back({y->cwiseMax(box.lower), 1});
  }
  return out;
}

MonotoneHull piece_hull(const PieceData& d, HullKind kind, const Box& box, const PipelineConfig& cfg) {
  HullOptions opts;
  opts.max_frontier = cfg.max_frontier;
  opts.box_upper = box.upper;
  return build_hull(kind == HullKind::Lower ? d.lower_hull : d.upper_hull, kind, opts);
}

// Anchors for every orthant from anchors found in the folded coordinates.
std::vector<TiltComponent> reflect_anchors(const ProblemSpec& p, const DominatingSet& dom) {
  const auto& g = p.gaussian();
  const Mat& c = g.covariance();
  if (g.mean().cwiseAbs().maxCoeff() > 0.0 || (c - Mat(c.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 0.0)
    throw InvalidArgument("folded orthants need a centered Gaussian with diagonal covariance");
  std::vector<TiltComponent> out;
  for (const auto& o : p.pieces())
    for (const auto& a : dom.points) out.push_back(tilt_param(p.family, Vec(o.signs.cwiseProduct(a))));
  return out;
}

struct Stage2Input {
  std::vector<TiltComponent> components;
  Oracle in_set;
};

PipelineResult run_stage2(const ProblemSpec& p, const PipelineConfig& cfg, Direction direction,
                          PipelineResult res, Stage2Input in) {
  const auto t0 = Clock::now();
  std::string note;
  if (in.components.empty()) {
    // No point of the set inside the box: sample from the input law itself.
    in.components.push_back(tilt_param(p.family, family_mean(p.family)));
    note = "no anchors in box";
  }
  for (const auto& c : in.components) res.anchors.push_back(c.anchor);
  const auto proposal = MixtureProposal::uniform(p.family, in.components);
  std::vector<Vec> draws;
  const auto seed = derive_seed(cfg.seed, kStage2Stream);
  const auto z = mixture_is_terms(in.in_set, proposal, cfg.n2, seed, cfg.workers, &draws);

  const BoundKind kind = direction == Direction::Outer ? BoundKind::Upper : BoundKind::Lower;
  res.report = summarize(z, kind);
  res.report.seed = cfg.seed;
  res.report.n_used = cfg.n1 + cfg.n2;

  const std::size_t n_orth = p.symmetry == Symmetry::None ? 1 : (std::size_t{1} << p.dim);
  std::vector<std::vector<double>> per(n_orth, std::vector<double>(z.size(), 0.0));
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z[i] != 0.0) per[n_orth == 1 ? 0 : static_cast<std::size_t>(orthant_index(draws[i]))][i] = z[i];
  for (auto& v : per) res.orthant_estimates.push_back(pairwise_sum(v) / static_cast<double>(z.size()));

  bool covered = true, verified = true;
  for (const auto& pc : res.pieces) {
    if (pc.skipped) continue;
    covered = covered && pc.dom.status == ResidualStatus::Covered;
    if (pc.set) verified = verified && pc.set->verified;
  }
  res.report.certified = covered && verified;
  if (!covered) note += note.empty() ? "residual not covered" : "; residual not covered";
  if (!verified) note += note.empty() ? "calibration not verified" : "; calibration not verified";
  if (res.report.zero_hit) note += note.empty() ? "zero hits" : "; zero hits";
  res.report.note = note;
  res.stage2_time = seconds_since(t0);
  res.report.wall_time = res.stage1_time + res.stage2_time;
  return res;
}

Stage1Data resolve_data(const ProblemSpec& p, const PipelineConfig& cfg, const Stage1Data* data) {
  return data ? *data : stage1_samples(p, cfg);
}

}  // namespace

Stage1Data stage1_samples(const ProblemSpec& p, const PipelineConfig& cfg) {
  if (cfg.n1 < 1) throw InvalidArgument("stage 1 needs n1 >= 1");
  Rng rng(derive_seed(cfg.seed, kStage1Stream));
  Stage1Data out;
  switch (cfg.sampler) {
    case Stage1Sampler::UniformBox:
      for (long i = 0; i < cfg.n1; ++i) out.x.push_back(uniform_point(p, rng));
      break;
    case Stage1Sampler::CeTrace: {
      auto ce = cross_entropy(p.level, p.gamma, p.gaussian(), cfg.ce, rng, true);
      out.x = take_last(ce.trace, cfg.n1);
      while (static_cast<long>(out.x.size()) < cfg.n1) out.x.push_back(ce.proposal.sample(rng));
      break;
    }
    case Stage1Sampler::AmsHistory: {
      auto a = ams(p.level, p.gamma, p.gaussian(), cfg.ams, rng, true);
      out.x = take_last(a.history, cfg.n1);
      while (static_cast<long>(out.x.size()) < cfg.n1) out.x.push_back(sample(p.family, rng));
      break;
    }
  }
  for (const auto& x : out.x) out.labels.push_back(p.oracle(x) ? 1 : 0);
  return out;
}

PipelineResult deep_prae(const ProblemSpec& p, const PipelineConfig& cfg, Direction direction, const Stage1Data* data) {
  const auto t0 = Clock::now();
  const Stage1Data d = resolve_data(p, cfg, data);
  PipelineResult res;
  res.method = "deep";
  res.n_label0 = d.n0();
  res.n_label1 = d.n1();
  if (res.n_label0 == 0 || res.n_label1 == 0)
    throw SingleClassData("stage-1 samples contain a single label (" + std::to_string(res.n_label0) + " label-0, " +
                          std::to_string(res.n_label1) + " label-1)");

  const Box box = p.box();
  const auto pieces = learning_pieces(p);
  if (!cfg.models.empty() && cfg.models.size() != pieces.size())
    throw InvalidArgument("expected " + std::to_string(pieces.size()) + " pre-trained models");

  std::vector<std::unique_ptr<LearnedRegion>> regions;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    PieceResult pr;
    pr.orientation = pieces[k];
    const auto pd = piece_data(p, pieces[k], d);
    const long ones = std::count_if(pd.train.begin(), pd.train.end(), [](const auto& s) { return s.label == 1; });
    const long zeros = static_cast<long>(pd.train.size()) - ones;
    if (direction == Direction::Inner && pd.upper_hull.empty()) {
      pr.skipped = true;
      res.pieces.push_back(std::move(pr));
      regions.emplace_back();
      continue;
    }
    if (zeros == 0 || ones == 0)
      throw SingleClassData("orthant piece " + std::to_string(k) + " has a single label");

    MlpParams params;
    if (!cfg.models.empty()) {
      params = cfg.models[k];
    } else {
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(cfg.seed, kTrainStream + 16 * k);
      params = train(pd.train, MlpSpec{p.dim, cfg.hidden}, tc);
    }
    auto cal = cfg.calibration;
    if (k > 0) cal.dump_milp_path.clear();
    if (direction == Direction::Outer) {
      pr.hull = piece_hull(pd, HullKind::Lower, box, cfg);
      pr.set = tune_kappa_outer(params, *pr.hull, box, pieces[k], cal, pd.all);
    } else {
      pr.hull = piece_hull(pd, HullKind::Upper, box, cfg);
      pr.set = tune_kappa_inner(params, *pr.hull, box, pieces[k], cal, pd.all);
    }
    auto region = std::make_unique<LearnedRegion>(*pr.set);
    auto sc = cfg.search;
    if (k > 0) sc.dump_milp_path.clear();
    pr.dom = search(*region, p.family, sc);
    regions.push_back(std::move(region));
    res.pieces.push_back(std::move(pr));
  }
  res.stage1_time = seconds_since(t0);

  Stage2Input in;
  if (p.symmetry == Symmetry::FoldedOrthants) {
    in.components = reflect_anchors(p, res.pieces.front().dom);
  } else {
    for (const auto& pr : res.pieces)
      if (!pr.skipped) in.components.insert(in.components.end(), pr.dom.tilts.begin(), pr.dom.tilts.end());
  }
  std::vector<const LearnedRegion*> rp;
  for (const auto& r : regions) rp.push_back(r.get());
  in.in_set = [&p, rp, pieces](const Vec& x) {
    for (std::size_t k = 0; k < rp.size(); ++k) {
      if (!rp[k]) continue;
      const auto y = piece_coords(p, pieces[k], x);
      if (y && rp[k]->contains(*y)) return true;
    }
    return false;
  };
  return run_stage2(p, cfg, direction, std::move(res), std::move(in));
}

PipelineResult lazy_prae(const ProblemSpec& p, const PipelineConfig& cfg, Direction direction, const Stage1Data* data) {
  const auto t0 = Clock::now();
  const Stage1Data d = resolve_data(p, cfg, data);
  PipelineResult res;
  res.method = "lazy";
  res.n_label0 = d.n0();
  res.n_label1 = d.n1();
  if (direction == Direction::Outer && res.n_label0 == 0) throw EmptyLabelClass("lazy upper bound needs label-0 samples");
  if (direction == Direction::Inner && res.n_label1 == 0) throw EmptyLabelClass("lazy lower bound needs label-1 samples");

  const Box box = p.box();
  const auto pieces = learning_pieces(p);
  std::vector<std::unique_ptr<Region>> regions;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    PieceResult pr;
    pr.orientation = pieces[k];
    const auto pd = piece_data(p, pieces[k], d);
    if (direction == Direction::Inner && pd.upper_hull.empty()) {
      pr.skipped = true;
      res.pieces.push_back(std::move(pr));
      regions.emplace_back();
      continue;
    }
    if (direction == Direction::Outer && pd.lower_hull.empty())
      throw EmptyLabelClass("orthant piece " + std::to_string(k) + " has no label-0 samples");
    std::unique_ptr<Region> region;
    if (direction == Direction::Outer) {
      pr.hull = piece_hull(pd, HullKind::Lower, box, cfg);
      region = std::make_unique<HullComplementRegion>(*pr.hull, box, pieces[k]);
    } else {
      pr.hull = piece_hull(pd, HullKind::Upper, box, cfg);
      region = std::make_unique<UpperHullRegion>(*pr.hull, box, pieces[k]);
    }
    auto sc = cfg.search;
    if (k > 0) sc.dump_milp_path.clear();
    pr.dom = search(*region, p.family, sc);
    regions.push_back(std::move(region));
    res.pieces.push_back(std::move(pr));
  }
  res.stage1_time = seconds_since(t0);

  Stage2Input in;
  if (p.symmetry == Symmetry::FoldedOrthants) {
    in.components = reflect_anchors(p, res.pieces.front().dom);
  } else {
    for (const auto& pr : res.pieces)
      if (!pr.skipped) in.components.insert(in.components.end(), pr.dom.tilts.begin(), pr.dom.tilts.end());
  }
  std::vector<const Region*> rp;
  for (const auto& r : regions) rp.push_back(r.get());
  const bool outer = direction == Direction::Outer;
  in.in_set = [&p, rp, pieces, box, outer](const Vec& x) {
    for (std::size_t k = 0; k < rp.size(); ++k) {
      if (!rp[k]) continue;
      const auto y = piece_coords(p, pieces[k], x);
      if (!y) continue;
      // Same out-of-box convention as the learned sets.
      if (outer) {
        if ((y->array() > box.upper.array()).any() || rp[k]->contains(y->cwiseMax(box.lower))) return true;
      } else {
        if ((y->array() >= box.lower.array()).all() && rp[k]->contains(y->cwiseMin(box.upper))) return true;
      }
    }
    return false;
  };
  return run_stage2(p, cfg, direction, std::move(res), std::move(in));
}

}  // namespace deepprae
