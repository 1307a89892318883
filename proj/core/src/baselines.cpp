#include "deepprae/baselines.hpp"

#include "deepprae/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace deepprae {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Mat symmetric(const Mat& m) { return 0.5 * (m + m.transpose()); }

Vec normalized_weights(std::vector<double> w) {
  Vec out(static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) out[static_cast<Eigen::Index>(i)] = std::max(w[i], 1e-12);
  out /= out.sum();
  out[out.size() - 1] = 1.0 - (out.sum() - out[out.size() - 1]);
  return out;
}

struct WeightedFit {
  Vec mean;
  Mat cov;
};

WeightedFit weighted_gaussian(const std::vector<Vec>& x, const std::vector<double>& w, double floor) {
  const int d = static_cast<int>(x.front().size());
  double total = 0.0;
  Vec m = Vec::Zero(d);
  for (std::size_t i = 0; i < x.size(); ++i) {
    m += w[i] * x[i];
    total += w[i];
  }
  m /= total;
  Mat c = Mat::Zero(d, d);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Vec dx = x[i] - m;
    c += w[i] * dx * dx.transpose();
  }
  c /= total;
  c += floor * Mat::Identity(d, d);
  return {m, symmetric(c)};
}

GmmFamily blend(const GmmFamily& fresh, const GmmFamily& old, double lambda) {
  std::vector<GaussianFamily> comps;
  std::vector<double> w;
  for (std::size_t k = 0; k < fresh.components().size(); ++k) {
    const auto& a = fresh.components()[k];
    const auto& b = old.components()[k];
    comps.emplace_back(lambda * a.mean() + (1.0 - lambda) * b.mean(),
                       symmetric(lambda * a.covariance() + (1.0 - lambda) * b.covariance()));
    w.push_back(lambda * fresh.weights()[static_cast<Eigen::Index>(k)] +
                (1.0 - lambda) * old.weights()[static_cast<Eigen::Index>(k)]);
  }
  return GmmFamily(std::move(comps), normalized_weights(std::move(w)));
}

double log_weight(const GaussianFamily& nominal, const GmmFamily& q, const Vec& x) {
  return nominal.log_density(x) - q.log_density(x);
}

}  // namespace

void CeConfig::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("ce rho must be in (0, 1)");
  if (components < 1) throw InvalidArgument("ce needs at least one component");
  if (!(smoothing > 0.0 && smoothing <= 1.0)) throw InvalidArgument("ce smoothing must be in (0, 1]");
  if (n_per_iter < 2 || n_final < 1 || iterations_max < 1) throw InvalidArgument("ce sample sizes must be positive");
}

void AmsConfig::validate() const {
  if (!(kill_fraction > 0.0 && kill_fraction < 1.0)) throw InvalidArgument("ams kill fraction must be in (0, 1)");
  if (n_particles < 10) throw InvalidArgument("ams needs at least 10 particles");
  if (static_cast<double>(n_particles) * kill_fraction < 1.0)
    throw InvalidArgument("ams must kill at least one particle per level");
  if (mh_steps < 1 || proposal_std <= 0.0) throw InvalidArgument("ams mh settings must be positive");
}

GmmFamily fit_gmm_weighted(const std::vector<Vec>& x, const std::vector<double>& w, int k, int iterations,
                           double cov_floor, Rng& rng) {
  if (x.empty() || x.size() != w.size()) throw InvalidArgument("weighted em needs matching points and weights");
  const auto n = x.size();
  const int d = static_cast<int>(x.front().size());
  const auto global = weighted_gaussian(x, w, cov_floor);

  // k-means++ seeding, with the sample weights folded into the selection law.
  std::vector<Vec> centers;
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto pick = [&](const std::vector<double>& score) {
    const double total = std::accumulate(score.begin(), score.end(), 0.0);
    if (!(total > 0.0)) return static_cast<std::size_t>(u01(rng) * static_cast<double>(n)) % n;
    double r = u01(rng) * total;
    for (std::size_t i = 0; i < n; ++i) {
      r -= score[i];
      if (r <= 0.0) return i;
    }
    return n - 1;
  };
  centers.push_back(x[pick(w)]);
  while (static_cast<int>(centers.size()) < k) {
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (x[i] - centers.back()).squaredNorm());
      score[i] = w[i] * dist[i];
    }
    centers.push_back(x[pick(score)]);
  }

  std::vector<Vec> means = centers;
  std::vector<Mat> covs(k, global.cov);
  std::vector<double> pis(k, 1.0 / k);
  std::vector<double> logr(static_cast<std::size_t>(k));
  Mat resp(static_cast<Eigen::Index>(n), k);
  for (int it = 0; it < iterations; ++it) {
    std::vector<GaussianFamily> comps;
    for (int j = 0; j < k; ++j) comps.emplace_back(means[j], covs[j]);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) logr[j] = std::log(pis[j]) + comps[j].log_density(x[i]);
      const double lse = log_sum_exp(logr);
      for (int j = 0; j < k; ++j) resp(static_cast<Eigen::Index>(i), j) = std::exp(logr[j] - lse);
    }
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      double nk = 0.0;
      Vec m = Vec::Zero(d);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = w[i] * resp(static_cast<Eigen::Index>(i), j);
        nk += r;
        m += r * x[i];
      }
      if (nk <= 1e-300) {
        means[j] = global.mean;
        covs[j] = global.cov;
        pis[j] = 1e-6;
        total += pis[j];
        continue;
      }
      m /= nk;
      Mat c = Mat::Zero(d, d);
      for (std::size_t i = 0; i < n; ++i) {
        const Vec dx = x[i] - m;
        c += (w[i] * resp(static_cast<Eigen::Index>(i), j)) * dx * dx.transpose();
      }
      means[j] = m;
      covs[j] = symmetric(c / nk + cov_floor * Mat::Identity(d, d));
      pis[j] = nk;
      total += nk;
    }
    for (auto& p : pis) p /= total;
  }
  std::vector<GaussianFamily> comps;
  for (int j = 0; j < k; ++j) comps.emplace_back(means[j], covs[j]);
  return GmmFamily(std::move(comps), normalized_weights(pis));
}

CeResult cross_entropy(const LevelFn& g, double gamma, const GaussianFamily& family, const CeConfig& cfg, Rng& rng,
                       bool keep_trace, const Oracle& event) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int k = cfg.kind == CeKind::SingleGaussian ? 1 : cfg.components;
  const int d = family.dim();
  GmmFamily q(std::vector<GaussianFamily>(k, family), Vec::Constant(k, 1.0 / k));
  CeResult res{q, {}, {}, false, false, {}, {}};
  const auto n = static_cast<std::size_t>(cfg.n_per_iter);

  for (int it = 0; it < cfg.iterations_max && !res.reached; ++it) {
    std::vector<Vec> x(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = q.sample(rng);
      s[i] = g(x[i]);
    }
    if (keep_trace) {
      res.trace.insert(res.trace.end(), x.begin(), x.end());
      res.trace_scores.insert(res.trace_scores.end(), s.begin(), s.end());
    }
    std::vector<double> sorted = s;
    const auto qi = std::min(n - 1, static_cast<std::size_t>(std::floor((1.0 - cfg.rho) * static_cast<double>(n))));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(qi), sorted.end());
    const double level = std::min(gamma, sorted[qi]);
    res.levels.push_back(level);
    if (level >= gamma) res.reached = true;

    std::vector<Vec> elite;
    std::vector<double> logw;
    for (std::size_t i = 0; i < n; ++i) {
      if (s[i] >= level) {
        elite.push_back(x[i]);
        logw.push_back(log_weight(family, q, x[i]));
      }
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    std::vector<double> w(logw.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logw[i] - mx);

    const bool thin = static_cast<int>(elite.size()) < d + 1;
    GmmFamily fresh = q;
    if (k == 1 || static_cast<int>(elite.size()) < k) {
      auto fit = weighted_gaussian(elite, w, cfg.cov_floor);
      if (thin || fit.cov.diagonal().minCoeff() <= 2.0 * cfg.cov_floor) res.degenerate_elite = true;
      fresh = GmmFamily(std::vector<GaussianFamily>(k, GaussianFamily(fit.mean, fit.cov)), Vec::Constant(k, 1.0 / k));
    } else {
      fresh = fit_gmm_weighted(elite, w, k, cfg.em_iterations, cfg.cov_floor, rng);
      if (thin) res.degenerate_elite = true;
    }
    q = blend(fresh, q, cfg.smoothing);
  }
  res.proposal = q;

  std::vector<double> z(static_cast<std::size_t>(cfg.n_final));
  for (auto& v : z) {
    const Vec x = q.sample(rng);
    const bool hit = event ? event(x) : g(x) >= gamma;
    v = hit ? std::exp(log_weight(family, q, x)) : 0.0;
  }
  res.report = summarize(z, BoundKind::Point);
  res.report.n_used = cfg.n_final + static_cast<long>(res.levels.size()) * cfg.n_per_iter;
  res.report.wall_time = seconds_since(t0);
  if (!res.reached) res.report.note = "target level not reached";
  if (res.degenerate_elite) res.report.note += res.report.note.empty() ? "degenerate elite" : "; degenerate elite";
  return res;
}

AmsResult ams(const LevelFn& g, double gamma, const GaussianFamily& family, const AmsConfig& cfg, Rng& rng,
              bool keep_history) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto n = static_cast<std::size_t>(cfg.n_particles);
  const int d = family.dim();
  const Vec step = cfg.proposal_std * family.covariance().diagonal().cwiseSqrt();
  AmsResult res;
  long evals = 0;
  auto score = [&](const Vec& x) {
    const double v = g(x);
    ++evals;
    if (keep_history) {
      res.history.push_back(x);
      res.history_scores.push_back(v);
    }
    return v;
  };

  std::vector<Vec> x(n);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = family.sample(rng);
    s[i] = score(x[i]);
  }

  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.kill_fraction)));
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double log_p = 0.0;
  double p0_sum = 0.0;
  int stall = 0;
  double prev_level = -std::numeric_limits<double>::infinity();
  bool stalled = false;

  for (int lvl = 0; lvl < cfg.max_levels; ++lvl) {
    std::vector<double> sorted = s;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(m - 1), sorted.end());
    const double level = sorted[m - 1];
    if (level >= gamma) break;
    if (level <= prev_level) {
      if (++stall >= cfg.stall_rounds) {
        stalled = true;
        break;
      }
    } else {
      stall = 0;
    }
    prev_level = level;

    std::vector<std::size_t> alive, dead;
    for (std::size_t i = 0; i < n; ++i) (s[i] > level ? alive : dead).push_back(i);
    if (alive.empty()) {
      stalled = true;
      break;
    }
    const double frac = static_cast<double>(alive.size()) / static_cast<double>(n);
    log_p += std::log(frac);
    p0_sum += (1.0 - frac) / frac;
    res.levels.push_back(level);

    for (std::size_t i : dead) {
      const std::size_t src = alive[static_cast<std::size_t>(u01(rng) * static_cast<double>(alive.size())) % alive.size()];
      Vec cur = x[src];
      double cur_s = s[src];
      double cur_ld = family.log_density(cur);
      for (int t = 0; t < cfg.mh_steps; ++t) {
        Vec prop = cur;
        for (int j = 0; j < d; ++j) prop[j] += step[j] * nd(rng);
        const double ld = family.log_density(prop);
        const bool accept_density = std::log(u01(rng)) < ld - cur_ld;
        if (!accept_density) continue;
        const double ps = score(prop);
        if (ps > level) {
          cur = std::move(prop);
          cur_s = ps;
          cur_ld = ld;
        }
      }
      x[i] = std::move(cur);
      s[i] = cur_s;
    }
  }

  long final_hits = 0;
  for (double v : s)
    if (v >= gamma) ++final_hits;
  const double r = static_cast<double>(final_hits) / static_cast<double>(n);
  auto& rep = res.report;
  rep.direction = BoundKind::Point;
  rep.n_used = evals;
  rep.hits = final_hits;
  rep.stalled = stalled;
  rep.estimate = final_hits > 0 ? std::exp(log_p) * r : 0.0;
  rep.zero_hit = final_hits == 0;
  if (final_hits > 0) {
    rep.empirical_re = p0_sum + (1.0 - r) / r;
    rep.second_moment = rep.estimate * rep.estimate * (1.0 + rep.empirical_re);
  }
  rep.wall_time = seconds_since(t0);
  if (stalled) rep.note = "stalled";
  return res;
}

}  // namespace deepprae
