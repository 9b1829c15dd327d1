#pragma once

#include "osm/mcmc.hpp"
#include "osm/stats.hpp"
#include "osm/trial_data.hpp"

namespace osm {

// Shared-random-effects joint model for TL, NT, NL and OS together. The
// longitudinal submodel matches the TL-OS one; each event hazard is Weibull
// with a subject-specific log scale:
//   log th_nt,i = z' beta_nt + phi1 b1 + phi2 b2 + b3
//   log th_nl,i = z' beta_nl + phi3 b1 + phi4 b2 + b4
//   log th_os,i = z' beta_os + phi5 b1 + phi6 b2 + phi7 b3 + phi8 b4
// with z = [1, arm, covariates...] (the intercept replaces a gamma scale).
class SpjmModel : public SubjectModel {
 public:
  explicit SpjmModel(const TrialSnapshot& snap);

  const ParameterSpace& space() const override { return space_; }
  int subject_count() const override { return static_cast<int>(yos_.size()); }
  double data_loglik(const double* theta, int subject) const override;
  double ranef_logpdf(const double* theta, int subject) const override;
  // OS hazard term only: the four outcomes are independent given the random
  // effects, so conditioning drops the Gaussian and the NT/NL event terms.
  double os_loglik(const double* theta, int subject) const override;
  std::vector<std::string> subject_ids() const override { return ids_; }

  WeibullHazard subject_os_hazard(const double* theta, int subject) const;
  double follow_up(int subject) const { return yos_[subject]; }

 private:
  double log_theta(const double* theta, int subject, int which) const;  // 0=nt 1=nl 2=os

  ParameterSpace space_;
  std::vector<std::vector<double>> x_;  // [1, arm, covs...]
  std::vector<std::vector<double>> tl_t_, tl_v_;
  std::vector<double> ynt_, ynl_, yos_;
  std::vector<int> dnt_, dnl_, dos_;
  std::vector<std::string> ids_;
  int head_dim_ = 0;
  int off_beta0_ = 0, off_sigma_y_ = 0, off_s1_ = 0, off_s2_ = 0, off_rho_ = 0, off_s3_ = 0,
      off_s4_ = 0;
  int off_alpha_[3] = {0, 0, 0};
  int off_beta_[3] = {0, 0, 0};
  int off_phi_ = 0, off_b_ = 0;
};

}  // namespace osm
