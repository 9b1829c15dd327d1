#pragma once

#include "osm/mcmc.hpp"
#include "osm/stats.hpp"
#include "osm/trial_data.hpp"

namespace osm {

// Shared-parameter joint model for the target-lesion sum and OS:
//   Y_ij ~ N(mu_i(t_ij), sigma_eps^2),  mu_i(t) = x_i' beta + beta_t t + b1_i + b2_i t
//   h_i(t) = alpha * gamma * t^(alpha-1) * exp(z_i' beta_os + lambda * mu_i(t))
// with (b1, b2) bivariate normal. The cumulative hazard has the form
// b * int alpha s^(alpha-1) exp(m s) ds handled by weibull_exp_linear_chaz.
class TlOsModel : public SubjectModel {
 public:
  explicit TlOsModel(const TrialSnapshot& snap);

  const ParameterSpace& space() const override { return space_; }
  int subject_count() const override { return static_cast<int>(y_.size()); }
  double data_loglik(const double* theta, int subject) const override;
  double ranef_logpdf(const double* theta, int subject) const override;
  // Event-law term only: given the random effects, OS is independent of the
  // longitudinal measurements, so the Gaussian terms drop out.
  double os_loglik(const double* theta, int subject) const override;
  std::vector<std::string> subject_ids() const override { return ids_; }

  // Event-time law of one subject at one draw: H(t) = b * int_0^t a s^(a-1) e^(ms) ds.
  struct EventLaw {
    double alpha;
    double b;
    double m;
  };
  EventLaw subject_event_law(const double* theta, int subject) const;
  double follow_up(int subject) const { return y_[subject]; }

 private:
  ParameterSpace space_;
  std::vector<std::vector<double>> x_;  // [1, arm, covs...]
  std::vector<std::vector<double>> z_;  // [arm, covs...]
  std::vector<std::vector<double>> tl_t_, tl_v_;
  std::vector<double> y_;
  std::vector<int> d_;
  std::vector<std::string> ids_;
  int head_dim_ = 0;
  int off_beta_mu_ = 0, off_sigma_eps_ = 0, off_s1_ = 0, off_s2_ = 0, off_rho_ = 0;
  int off_beta_os_ = -1, off_gamma_ = 0, off_alpha_ = 0, off_lambda_ = 0, off_b_ = 0;
};

}  // namespace osm
