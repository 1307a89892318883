#include "deepprae/distributions.hpp"

#include "deepprae/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace deepprae {

namespace {

constexpr double kTiltTol = 1e-8;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vec scalar_vec(double v) { return Vec::Constant(1, v); }

double only(const Vec& v, const char* what) {
  if (v.size() != 1) throw DimensionMismatch(std::string(what) + ": gamma family is one-dimensional");
  return v[0];
}

void require_dim(const Vec& v, int d, const char* what) {
  if (v.size() != d) throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(d));
}

}  // namespace

double log_sum_exp(std::span<const double> terms) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double t : terms) hi = std::max(hi, t);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

// ---------------------------------------------------------------- Gaussian

GaussianFamily::GaussianFamily(Vec mean, Mat covariance) : mean_(std::move(mean)), cov_(std::move(covariance)) {
  const int d = dim();
  if (d == 0) throw InvalidArgument("gaussian family needs dimension >= 1");
  if (cov_.rows() != d || cov_.cols() != d) throw DimensionMismatch("covariance shape does not match mean");
  if (!mean_.allFinite() || !cov_.allFinite()) throw DomainError("gaussian parameters must be finite");
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw DomainError("covariance not symmetric");
  Eigen::LLT<Mat> llt(cov_);
  if (llt.info() != Eigen::Success) throw DomainError("covariance not positive definite");
  chol_ = llt.matrixL();
  if ((chol_ * chol_.transpose() - cov_).cwiseAbs().maxCoeff() > 1e-10)
    throw DomainError("covariance factorization is inaccurate");
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

GaussianFamily GaussianFamily::isotropic(Vec mean, double variance) {
  const auto d = mean.size();
  return GaussianFamily(std::move(mean), Mat::Identity(d, d) * variance);
}

double GaussianFamily::cgf(const Vec& s) const {
  require_dim(s, dim(), "cgf");
  return mean_.dot(s) + 0.5 * s.dot(cov_ * s);
}

Vec GaussianFamily::cgf_gradient(const Vec& s) const {
  require_dim(s, dim(), "cgf_gradient");
  return mean_ + cov_ * s;
}

Vec GaussianFamily::solve(const Vec& v) const {
  const auto& L = chol_.triangularView<Eigen::Lower>();
  Vec w = L.solve(v);
  return L.transpose().solve(w);
}

Mat GaussianFamily::precision() const {
  const auto& L = chol_.triangularView<Eigen::Lower>();
  Mat w = L.solve(Mat::Identity(dim(), dim()));
  return w.transpose() * w;
}

double GaussianFamily::rate(const Vec& y) const {
  require_dim(y, dim(), "rate");
  Vec w = chol_.triangularView<Eigen::Lower>().solve(y - mean_);
  return 0.5 * w.squaredNorm();
}

Vec GaussianFamily::tilt_for(const Vec& a) const {
  require_dim(a, dim(), "tilt");
  return solve(a - mean_);
}

double GaussianFamily::log_density(const Vec& x) const {
  require_dim(x, dim(), "log_density");
  Vec w = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return -0.5 * (dim() * std::log(2.0 * std::numbers::pi) + log_det_ + w.squaredNorm());
}

Vec GaussianFamily::sample(Rng& rng) const { return sample_with_mean(mean_, rng); }

Vec GaussianFamily::sample_with_mean(const Vec& m, Rng& rng) const {
  std::normal_distribution<double> n01;
  Vec z(dim());
  for (int i = 0; i < dim(); ++i) z[i] = n01(rng);
  return m + chol_.triangularView<Eigen::Lower>() * z;
}

// ------------------------------------------------------------------- Gamma

GammaFamily::GammaFamily(double shape, double rate) : shape_(shape), rate_(rate) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
    throw DomainError("gamma family needs shape > 0 and rate > 0");
}

double GammaFamily::cgf(double s) const {
  if (!std::isfinite(s) || s >= rate_) throw DomainError("gamma cgf requires s < rate");
  return -shape_ * std::log1p(-s / rate_);
}

double GammaFamily::cgf_derivative(double s) const {
  if (!std::isfinite(s) || s >= rate_) throw DomainError("gamma cgf requires s < rate");
  return shape_ / (rate_ - s);
}

double GammaFamily::tilt_for(double a) const {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("gamma tilt requires a > 0");
  return rate_ - shape_ / a;
}

double GammaFamily::rate(double y) const {
  const double s = tilt_for(y);
  return s * y - cgf(s);
}

double GammaFamily::log_density(double x) const {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape_ * std::log(rate_) - std::lgamma(shape_) + (shape_ - 1.0) * std::log(x) - rate_ * x;
}

double GammaFamily::sample(Rng& rng) const {
  std::gamma_distribution<double> g(shape_, 1.0 / rate_);
  return g(rng);
}

double GammaFamily::sample_tilted(double a, Rng& rng) const {
  if (!(a > 0.0)) throw DomainError("gamma tilt requires a > 0");
  std::gamma_distribution<double> g(shape_, a / shape_);
  return g(rng);
}

// --------------------------------------------------------------------- GMM

GmmFamily::GmmFamily(std::vector<GaussianFamily> components, Vec weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw InvalidArgument("gmm needs at least one component");
  if (static_cast<std::size_t>(weights_.size()) != components_.size())
    throw DimensionMismatch("gmm weight count does not match component count");
  for (const auto& c : components_)
    if (c.dim() != components_.front().dim()) throw DimensionMismatch("gmm components differ in dimension");
  if ((weights_.array() <= 0.0).any()) throw DomainError("gmm weights must be positive");
  if (std::abs(weights_.sum() - 1.0) > 1e-12) throw DomainError("gmm weights must sum to 1");
}

Vec GmmFamily::mean() const {
  Vec m = Vec::Zero(dim());
  for (std::size_t i = 0; i < components_.size(); ++i) m += weights_[i] * components_[i].mean();
  return m;
}

GaussianFamily GmmFamily::moment_matched() const {
  const Vec m = mean();
  Mat cov = Mat::Zero(dim(), dim());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const Vec dm = components_[i].mean() - m;
    cov += weights_[i] * (components_[i].covariance() + dm * dm.transpose());
  }
  cov = 0.5 * (cov + cov.transpose());
  return GaussianFamily(m, cov);
}

Vec GmmFamily::log_terms(const Vec& s) const {
  require_dim(s, dim(), "gmm cgf");
  Vec t(components_.size());
  for (std::size_t i = 0; i < components_.size(); ++i) t[i] = std::log(weights_[i]) + components_[i].cgf(s);
  return t;
}

double GmmFamily::cgf(const Vec& s) const {
  const Vec t = log_terms(s);
  return log_sum_exp({t.data(), static_cast<std::size_t>(t.size())});
}

Vec GmmFamily::tilted_weights(const Vec& s) const {
  const Vec t = log_terms(s);
  const double lse = log_sum_exp({t.data(), static_cast<std::size_t>(t.size())});
  return (t.array() - lse).exp().matrix();
}

Vec GmmFamily::cgf_gradient(const Vec& s) const {
  const Vec w = tilted_weights(s);
  Vec g = Vec::Zero(dim());
  for (std::size_t i = 0; i < components_.size(); ++i) g += w[i] * components_[i].cgf_gradient(s);
  return g;
}

Mat GmmFamily::cgf_hessian(const Vec& s) const {
  const Vec w = tilted_weights(s);
  Vec g = Vec::Zero(dim());
  std::vector<Vec> mus;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    mus.push_back(components_[i].cgf_gradient(s));
    g += w[i] * mus.back();
  }
  Mat h = Mat::Zero(dim(), dim());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const Vec dm = mus[i] - g;
    h += w[i] * (components_[i].covariance() + dm * dm.transpose());
  }
  return h;
}

Vec GmmFamily::tilt_for(const Vec& a, double tol, int max_iter) const {
  require_dim(a, dim(), "gmm tilt");
  if (!a.allFinite()) throw DomainError("gmm tilt requires a finite anchor");
  // Damped Newton on phi(s) = cgf(s) - a's, which is convex.
  Vec s = moment_matched().tilt_for(a);
  auto phi = [&](const Vec& v) { return cgf(v) - a.dot(v); };
  double f = phi(s);
  // Newton converges quadratically near the root, so aim well below tol.
  for (int it = 0; it < max_iter; ++it) {
    const Vec grad = cgf_gradient(s) - a;
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-3 * tol) return s;
    const Mat h = cgf_hessian(s);
    const Vec step = -h.ldlt().solve(grad);
    const double slope = grad.dot(step);
    double t = 1.0;
    Vec next = s + step;
    double fn = phi(next);
    while (!(fn <= f + 1e-4 * t * slope) && t > 1e-12) {
      t *= 0.5;
      next = s + t * step;
      fn = phi(next);
    }
    if (t <= 1e-12) {
      // No decrease possible at double precision; accept if the residual is tiny.
      if (grad.lpNorm<Eigen::Infinity>() <= 10 * tol * std::max(1.0, a.lpNorm<Eigen::Infinity>())) return s;
      break;
    }
    s = next;
    f = fn;
  }
  const Vec grad = cgf_gradient(s) - a;
  if (grad.lpNorm<Eigen::Infinity>() <= tol * std::max(1.0, a.lpNorm<Eigen::Infinity>())) return s;
  throw ConvergenceError("gmm tilt solver did not converge");
}

double GmmFamily::rate(const Vec& y) const {
  const Vec s = tilt_for(y);
  return s.dot(y) - cgf(s);
}

double GmmFamily::log_density(const Vec& x) const {
  Vec t(components_.size());
  for (std::size_t i = 0; i < components_.size(); ++i)
    t[i] = std::log(weights_[i]) + components_[i].log_density(x);
  return log_sum_exp({t.data(), static_cast<std::size_t>(t.size())});
}

Vec GmmFamily::sample(Rng& rng) const {
  std::discrete_distribution<std::size_t> pick(weights_.data(), weights_.data() + weights_.size());
  return components_[pick(rng)].sample(rng);
}

Vec GmmFamily::sample_tilted(const Vec& s, Rng& rng) const {
  const Vec w = tilted_weights(s);
  std::discrete_distribution<std::size_t> pick(w.data(), w.data() + w.size());
  const auto& c = components_[pick(rng)];
  return c.sample_with_mean(c.cgf_gradient(s), rng);
}

// ------------------------------------------------------------ family facade

int dim(const Family& f) {
  return std::visit(Overloaded{[](const GaussianFamily& g) { return g.dim(); },
                               [](const GammaFamily&) { return 1; },
                               [](const GmmFamily& g) { return g.dim(); }},
                    f);
}

Vec family_mean(const Family& f) {
  return std::visit(Overloaded{[](const GaussianFamily& g) { return g.mean(); },
                               [](const GammaFamily& g) { return scalar_vec(g.mean()); },
                               [](const GmmFamily& g) { return g.mean(); }},
                    f);
}

double cgf(const Family& f, const Vec& s) {
  if (!s.allFinite()) throw DomainError("cgf argument must be finite");
  return std::visit(Overloaded{[&](const GaussianFamily& g) { return g.cgf(s); },
                               [&](const GammaFamily& g) { return g.cgf(only(s, "cgf")); },
                               [&](const GmmFamily& g) { return g.cgf(s); }},
                    f);
}

Vec cgf_gradient(const Family& f, const Vec& s) {
  return std::visit(Overloaded{[&](const GaussianFamily& g) { return g.cgf_gradient(s); },
                               [&](const GammaFamily& g) { return scalar_vec(g.cgf_derivative(only(s, "cgf"))); },
                               [&](const GmmFamily& g) { return g.cgf_gradient(s); }},
                    f);
}

double rate(const Family& f, const Vec& y) {
  return std::visit(Overloaded{[&](const GaussianFamily& g) { return g.rate(y); },
                               [&](const GammaFamily& g) { return g.rate(only(y, "rate")); },
                               [&](const GmmFamily& g) { return g.rate(y); }},
                    f);
}

double log_density(const Family& f, const Vec& x) {
  return std::visit(Overloaded{[&](const GaussianFamily& g) { return g.log_density(x); },
                               [&](const GammaFamily& g) { return g.log_density(only(x, "density")); },
                               [&](const GmmFamily& g) { return g.log_density(x); }},
                    f);
}

Vec sample(const Family& f, Rng& rng) {
  return std::visit(Overloaded{[&](const GaussianFamily& g) { return g.sample(rng); },
                               [&](const GammaFamily& g) { return scalar_vec(g.sample(rng)); },
                               [&](const GmmFamily& g) { return g.sample(rng); }},
                    f);
}

TiltComponent tilt_param(const Family& f, const Vec& a) {
  Vec s = std::visit(Overloaded{[&](const GaussianFamily& g) { return g.tilt_for(a); },
                                [&](const GammaFamily& g) { return scalar_vec(g.tilt_for(only(a, "tilt"))); },
                                [&](const GmmFamily& g) { return g.tilt_for(a); }},
                     f);
  return make_tilt_component(f, a, std::move(s));
}

TiltComponent make_tilt_component(const Family& f, Vec anchor, Vec tilt) {
  if (anchor.size() != dim(f) || tilt.size() != dim(f)) throw DimensionMismatch("tilt component dimension");
  const Vec grad = cgf_gradient(f, tilt);
  const double scale = std::max(1.0, anchor.lpNorm<Eigen::Infinity>());
  if ((grad - anchor).lpNorm<Eigen::Infinity>() > kTiltTol * scale)
    throw ConvergenceError("tilt parameter does not reproduce its anchor");
  const double ln = cgf(f, tilt);
  return TiltComponent{std::move(anchor), std::move(tilt), ln};
}

Vec sample_tilted(const Family& f, const TiltComponent& c, Rng& rng) {
  return std::visit(Overloaded{[&](const GaussianFamily& g) { return g.sample_with_mean(c.anchor, rng); },
                               [&](const GammaFamily& g) { return scalar_vec(g.sample_tilted(c.anchor[0], rng)); },
                               [&](const GmmFamily& g) { return g.sample_tilted(c.tilt, rng); }},
                    f);
}

Vec cgf_gradient_fd(const Family& f, const Vec& s, double h) {
  Vec g(s.size());
  for (int i = 0; i < s.size(); ++i) {
    Vec p = s, m = s;
    p[i] += h;
    m[i] -= h;
    g[i] = (cgf(f, p) - cgf(f, m)) / (2 * h);
  }
  return g;
}

// ---------------------------------------------------------------- proposal

MixtureProposal::MixtureProposal(Family family, std::vector<TiltComponent> components, Vec alphas)
    : family_(std::move(family)), components_(std::move(components)), alphas_(std::move(alphas)) {
  if (components_.empty()) throw InvalidArgument("mixture proposal needs at least one component");
  if (static_cast<std::size_t>(alphas_.size()) != components_.size())
    throw DimensionMismatch("alpha count does not match component count");
  if ((alphas_.array() < 0.0).any()) throw DomainError("mixture weights must be nonnegative");
  if (std::abs(alphas_.sum() - 1.0) > 1e-12) throw DomainError("mixture weights must sum to 1");
  const int d = dim(family_);
  for (const auto& c : components_)
    if (c.anchor.size() != d || c.tilt.size() != d) throw DimensionMismatch("tilt component dimension");
  for (int j = 0; j < alphas_.size(); ++j)
    log_alphas_.push_back(alphas_[j] > 0.0 ? std::log(alphas_[j]) : -std::numeric_limits<double>::infinity());
}

MixtureProposal MixtureProposal::uniform(Family family, std::vector<TiltComponent> components) {
  const auto k = static_cast<Eigen::Index>(components.size());
  if (k == 0) throw InvalidArgument("mixture proposal needs at least one component");
  Vec alphas = Vec::Constant(k, 1.0 / static_cast<double>(k));
  alphas[k - 1] = 1.0 - alphas.head(k - 1).sum();
  return MixtureProposal(std::move(family), std::move(components), std::move(alphas));
}

Vec MixtureProposal::sample(Rng& rng) const {
  std::size_t j = 0;
  if (components_.size() > 1) {
    std::discrete_distribution<std::size_t> pick(alphas_.data(), alphas_.data() + alphas_.size());
    j = pick(rng);
  }
  return sample_tilted(family_, components_[j], rng);
}

double MixtureProposal::log_likelihood_ratio(const Vec& x) const {
  std::vector<double> t(components_.size());
  for (std::size_t j = 0; j < components_.size(); ++j) {
    const auto& c = components_[j];
    t[j] = log_alphas_[j] + c.tilt.dot(x) - c.log_norm;
  }
  return -log_sum_exp(t);
}

double MixtureProposal::likelihood_ratio(const Vec& x) const {
  const double l = log_likelihood_ratio(x);
  if (l >= std::log(std::numeric_limits<double>::max())) return std::numeric_limits<double>::max();
  return std::exp(l);
}

// -------------------------------------------------------------------- json

namespace {

using nlohmann::json;

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json mat_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Vec r = m.row(i).transpose();
    rows.push_back(vec_json(r));
  }
  return rows;
}

Vec json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Mat json_mat(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Mat m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != static_cast<std::size_t>(m.cols())) throw ConfigParse("ragged covariance matrix");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

}  // namespace

std::string family_to_json(const Family& f) {
  json j = std::visit(Overloaded{[](const GaussianFamily& g) {
                                   return json{{"kind", "gaussian"}, {"mean", vec_json(g.mean())},
                                               {"covariance", mat_json(g.covariance())}};
                                 },
                                 [](const GammaFamily& g) {
                                   return json{{"kind", "gamma"}, {"shape", g.shape()}, {"rate", g.rate_param()}};
                                 },
                                 [](const GmmFamily& g) {
                                   json means = json::array(), covs = json::array();
                                   for (const auto& c : g.components()) {
                                     means.push_back(vec_json(c.mean()));
                                     covs.push_back(mat_json(c.covariance()));
                                   }
                                   return json{{"kind", "gmm"}, {"weights", vec_json(g.weights())},
                                               {"mean", means}, {"covariance", covs}};
                                 }},
                      f);
  return j.dump(2);
}

Family family_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "gaussian") return GaussianFamily(json_vec(j.at("mean")), json_mat(j.at("covariance")));
    if (kind == "gamma") return GammaFamily(j.at("shape").get<double>(), j.at("rate").get<double>());
    if (kind == "gmm") {
      std::vector<GaussianFamily> comps;
      const auto& means = j.at("mean");
      const auto& covs = j.at("covariance");
      if (means.size() != covs.size()) throw ConfigParse("gmm mean/covariance count mismatch");
      for (std::size_t i = 0; i < means.size(); ++i) comps.emplace_back(json_vec(means[i]), json_mat(covs[i]));
      return GmmFamily(std::move(comps), json_vec(j.at("weights")));
    }
    throw ConfigParse("unknown family kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ConfigParse(std::string("family config: ") + e.what());
  }
}

}  // namespace deepprae
