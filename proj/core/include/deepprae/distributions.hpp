#pragma once

#include "deepprae/common.hpp"

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace deepprae {

// The only path to exponentials of large arguments in this module.
// -inf terms are ignored; an all -inf input returns -inf.
double log_sum_exp(std::span<const double> terms);

class GaussianFamily {
 public:
  GaussianFamily(Vec mean, Mat covariance);
  static GaussianFamily isotropic(Vec mean, double variance);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vec& mean() const { return mean_; }
  const Mat& covariance() const { return cov_; }
  const Mat& chol() const { return chol_; }

  double cgf(const Vec& s) const;
  Vec cgf_gradient(const Vec& s) const;
  double rate(const Vec& y) const;
  Vec tilt_for(const Vec& a) const;
  Vec solve(const Vec& v) const;  // covariance^{-1} v
  Mat precision() const;
  double log_density(const Vec& x) const;

  Vec sample(Rng& rng) const;
  Vec sample_with_mean(const Vec& m, Rng& rng) const;

 private:
  Vec mean_;
  Mat cov_;
  Mat chol_;
  double log_det_ = 0.0;
};

class GammaFamily {
 public:
  GammaFamily(double shape, double rate);

  double shape() const { return shape_; }
  double rate_param() const { return rate_; }
  double mean() const { return shape_ / rate_; }

  double cgf(double s) const;
  double cgf_derivative(double s) const;
  double rate(double y) const;
  double tilt_for(double a) const;
  double log_density(double x) const;
  double sample(Rng& rng) const;
  // Draw from Gamma(shape, shape / a), the tilt anchored at a.
  double sample_tilted(double a, Rng& rng) const;

 private:
  double shape_;
  double rate_;
};

class GmmFamily {
 public:
  GmmFamily(std::vector<GaussianFamily> components, Vec weights);

  int dim() const { return components_.front().dim(); }
  const std::vector<GaussianFamily>& components() const { return components_; }
  const Vec& weights() const { return weights_; }
  Vec mean() const;
  // Single Gaussian with the mixture's first two moments.
  GaussianFamily moment_matched() const;

  double cgf(const Vec& s) const;
  Vec cgf_gradient(const Vec& s) const;
  Mat cgf_hessian(const Vec& s) const;
  Vec tilted_weights(const Vec& s) const;
  double rate(const Vec& y) const;
  Vec tilt_for(const Vec& a, double tol = 1e-8, int max_iter = 200) const;
  double log_density(const Vec& x) const;

  Vec sample(Rng& rng) const;
  Vec sample_tilted(const Vec& s, Rng& rng) const;

 private:
  Vec log_terms(const Vec& s) const;

  std::vector<GaussianFamily> components_;
  Vec weights_;
};

using Family = std::variant<GaussianFamily, GammaFamily, GmmFamily>;

struct TiltComponent {
  Vec anchor;
  Vec tilt;
  double log_norm = 0.0;
};

int dim(const Family& f);
Vec family_mean(const Family& f);
double cgf(const Family& f, const Vec& s);
Vec cgf_gradient(const Family& f, const Vec& s);
double rate(const Family& f, const Vec& y);
double log_density(const Family& f, const Vec& x);
Vec sample(const Family& f, Rng& rng);

TiltComponent tilt_param(const Family& f, const Vec& a);
// Validates grad cgf(tilt) == anchor before accepting the component.
TiltComponent make_tilt_component(const Family& f, Vec anchor, Vec tilt);
Vec sample_tilted(const Family& f, const TiltComponent& c, Rng& rng);

// Central differences of the cgf; used to audit closed-form gradients.
Vec cgf_gradient_fd(const Family& f, const Vec& s, double h = 1e-5);

class MixtureProposal {
 public:
  MixtureProposal(Family family, std::vector<TiltComponent> components, Vec alphas);
  static MixtureProposal uniform(Family family, std::vector<TiltComponent> components);

  const Family& family() const { return family_; }
  const std::vector<TiltComponent>& components() const { return components_; }
  const Vec& alphas() const { return alphas_; }

  Vec sample(Rng& rng) const;
  double log_likelihood_ratio(const Vec& x) const;
  // exp(log_likelihood_ratio), saturating at the largest finite double.
  double likelihood_ratio(const Vec& x) const;

 private:
  Family family_;
  std::vector<TiltComponent> components_;
  Vec alphas_;
  std::vector<double> log_alphas_;
};

std::string family_to_json(const Family& f);
Family family_from_json(std::string_view text);

}  // namespace deepprae
