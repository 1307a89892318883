#include "deepprae/estimators.hpp"

#include "deepprae/errors.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace deepprae {

std::string_view to_string(BoundKind b) {
  switch (b) {
    case BoundKind::Upper: return "upper";
    case BoundKind::Lower: return "lower";
    case BoundKind::Point: return "point";
  }
  return "point";
}

BoundKind bound_kind_from_string(std::string_view s) {
  if (s == "upper") return BoundKind::Upper;
  if (s == "lower") return BoundKind::Lower;
  if (s == "point") return BoundKind::Point;
  throw InvalidArgument("unknown bound kind: " + std::string(s));
}

double EstimateReport::standard_error() const {
  if (n_used < 1) return 0.0;
  const double var = std::max(0.0, second_moment - estimate * estimate);
  return std::sqrt(var / static_cast<double>(n_used));
}

double EstimateReport::required_n() const { return empirical_re / (delta * epsilon * epsilon); }

EstimateReport summarize(std::span<const double> z, BoundKind direction) {
  EstimateReport r;
  r.direction = direction;
  r.n_used = static_cast<long>(z.size());
  if (z.empty()) {
    r.zero_hit = true;
    return r;
  }
  std::vector<double> sq(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    sq[i] = z[i] * z[i];
    if (z[i] != 0.0) ++r.hits;
  }
  const double n = static_cast<double>(z.size());
  r.estimate = pairwise_sum(z) / n;
  r.second_moment = pairwise_sum(sq) / n;
  r.zero_hit = r.hits == 0;
  if (r.estimate > 0.0) {
    r.empirical_re = std::max(0.0, r.second_moment - r.estimate * r.estimate) / (r.estimate * r.estimate);
  }
  return r;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return splitmix(splitmix(seed) ^ index); }

EstimateReport naive_mc(const Oracle& oracle, const Family& family, long n, Rng& rng) {
  if (n < 1) throw InvalidArgument("naive_mc needs n >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> z(static_cast<std::size_t>(n));
  for (auto& v : z) v = oracle(sample(family, rng)) ? 1.0 : 0.0;
  auto r = summarize(z, BoundKind::Point);
  r.wall_time = seconds_since(t0);
  if (r.zero_hit) r.note = "zero hits";
  return r;
}

std::vector<double> mixture_is_terms(const Oracle& in_set, const MixtureProposal& proposal, long n,
                                     std::uint64_t seed, int workers, std::vector<Vec>* draws) {
  if (n < 1) throw InvalidArgument("mixture_is needs n >= 1");
  if (workers < 1) throw InvalidArgument("workers must be >= 1");
  const auto nn = static_cast<std::size_t>(n);
  std::vector<double> z(nn);
  if (draws) draws->assign(nn, Vec());
  const auto w = static_cast<std::size_t>(workers);
  auto block = [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    const std::size_t begin = b * nn / w, end = (b + 1) * nn / w;
    for (std::size_t i = begin; i < end; ++i) {
      Vec x = proposal.sample(rng);
      z[i] = in_set(x) ? proposal.likelihood_ratio(x) : 0.0;
      if (draws) (*draws)[i] = std::move(x);
    }
  };
  if (w == 1) {
    block(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t b = 0; b < w; ++b) pool.emplace_back(block, b);
  }
  return z;
}

EstimateReport mixture_is(const Oracle& in_set, const MixtureProposal& proposal, long n, std::uint64_t seed,
                          int workers, BoundKind direction) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto z = mixture_is_terms(in_set, proposal, n, seed, workers);
  auto r = summarize(z, direction);
  r.seed = seed;
  r.wall_time = seconds_since(t0);
  if (r.zero_hit) r.note = "zero hits";
  return r;
}

EstimateReport peril_single_point_is(double gamma, double k, long n, Rng& rng) {
  if (!(k > 0.0 && k < 3.0)) throw InvalidArgument("peril estimator needs 0 < k < 3");
  if (n < 1) throw InvalidArgument("peril estimator needs n >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  std::normal_distribution<double> nd(gamma, 1.0);
  std::vector<double> z(static_cast<std::size_t>(n));
  for (auto& v : z) {
    const double x = nd(rng);
    v = (x >= gamma || x <= -k * gamma) ? std::exp(-gamma * x + 0.5 * gamma * gamma) : 0.0;
  }
  auto r = summarize(z, BoundKind::Point);
  r.wall_time = seconds_since(t0);
  return r;
}

std::string report_to_json(const EstimateReport& r) {
  nlohmann::json j;
  j["estimate"] = r.estimate;
  j["second_moment"] = r.second_moment;
  j["empirical_re"] = r.empirical_re;
  j["standard_error"] = r.standard_error();
  j["n_used"] = r.n_used;
  j["direction"] = std::string(to_string(r.direction));
  j["certified"] = r.certified;
  j["hits"] = r.hits;
  j["zero_hit"] = r.zero_hit;
  j["stalled"] = r.stalled;
  j["seed"] = r.seed;
  j["wall_time"] = r.wall_time;
  j["epsilon"] = r.epsilon;
  j["delta"] = r.delta;
  j["note"] = r.note;
  return j.dump(2);
}

}  // namespace deepprae
