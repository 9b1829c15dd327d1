#include "osm/models/tl_os.hpp"

#include <cmath>

#include "osm/models/design.hpp"

namespace osm {

TlOsModel::TlOsModel(const TrialSnapshot& snap) {
  x_ = intercept_design(snap);
  z_ = hazard_design(snap);
  ids_ = collect_ids(snap);
  double val_sum = 0.0, val_sq = 0.0;
  int n_val = 0;
  for (const auto& s : snap.subjects) {
    tl_t_.push_back(s.tl_times);
    tl_v_.push_back(s.tl_values);
    y_.push_back(s.os.time);
    d_.push_back(s.os.indicator);
    for (double v : s.tl_values) {
      val_sum += v;
      val_sq += v * v;
      ++n_val;
    }
  }
  double sd_val = 1.0;
  if (n_val >= 2) {
    const double mean = val_sum / n_val;
    const double var = (val_sq - n_val * mean * mean) / (n_val - 1);
    if (var > 0.0) sd_val = std::sqrt(var);
  }
  head_dim_ = static_cast<int>(x_.front().size());
  const int pz = static_cast<int>(z_.front().size());
  const int n = subject_count();
  // time slope is the last component of beta_mu
  space_.add({"beta_mu", head_dim_ + 1, 1, Support::Real, Role::Global, Kind::Coefficient, 0.0});
  space_.add({"sigma_eps", 1, 1, Support::Positive, Role::Global, Kind::StdDev, sd_val});
  space_.add({"sigma_b1", 1, 1, Support::Positive, Role::Global, Kind::StdDev, sd_val});
  space_.add({"sigma_b2", 1, 1, Support::Positive, Role::Global, Kind::StdDev, 1.0});
  space_.add({"rho_b", 1, 1, Support::Corr, Role::Global, Kind::Correlation, 0.0});
  space_.add({"beta_os", pz, 1, Support::Real, Role::Global, Kind::Coefficient, 0.0});
  space_.add({"gamma_os", 1, 1, Support::Positive, Role::Global, Kind::RateScale,
              1.0 / mean_positive_time(y_)});
  space_.add({"alpha_os", 1, 1, Support::Positive, Role::Global, Kind::Shape, 1.0});
  space_.add({"lambda", 1, 1, Support::Real, Role::Global, Kind::Association, 0.0});
  space_.add({"b", 2 * n, 2, Support::Real, Role::PerSubject, Kind::RandomEffect, 0.0});

  off_beta_mu_ = space_.offset(space_.find("beta_mu"));
  off_sigma_eps_ = space_.offset(space_.find("sigma_eps"));
  off_s1_ = space_.offset(space_.find("sigma_b1"));
  off_s2_ = space_.offset(space_.find("sigma_b2"));
  off_rho_ = space_.offset(space_.find("rho_b"));
  off_beta_os_ = space_.find("beta_os") >= 0 ? space_.offset(space_.find("beta_os")) : -1;
  off_gamma_ = space_.offset(space_.find("gamma_os"));
  off_alpha_ = space_.offset(space_.find("alpha_os"));
  off_lambda_ = space_.offset(space_.find("lambda"));
  off_b_ = space_.offset(space_.find("b"));
}

TlOsModel::EventLaw TlOsModel::subject_event_law(const double* theta, int subject) const {
  const double b1 = theta[off_b_ + 2 * subject];
  const double b2 = theta[off_b_ + 2 * subject + 1];
  const double head = dot_row(x_[subject], theta + off_beta_mu_) + b1;
  const double slope = theta[off_beta_mu_ + head_dim_] + b2;
  const double lambda = theta[off_lambda_];
  const double lin = (off_beta_os_ >= 0 ? dot_row(z_[subject], theta + off_beta_os_) : 0.0) +
                     lambda * head;
  return {theta[off_alpha_], theta[off_gamma_] * std::exp(lin), lambda * slope};
}

double TlOsModel::data_loglik(const double* theta, int subject) const {
  const double b1 = theta[off_b_ + 2 * subject];
  const double b2 = theta[off_b_ + 2 * subject + 1];
  const double head = dot_row(x_[subject], theta + off_beta_mu_) + b1;
  const double slope = theta[off_beta_mu_ + head_dim_] + b2;
  const double sigma = theta[off_sigma_eps_];

  double ll = 0.0;
  const auto& tt = tl_t_[subject];
  const auto& vv = tl_v_[subject];
  for (size_t j = 0; j < tt.size(); ++j) {
    ll += normal_logpdf(vv[j], head + slope * tt[j], sigma);
  }

  const EventLaw law = subject_event_law(theta, subject);
  const double y = std::max(y_[subject], 1e-10);
  ll -= weibull_exp_linear_chaz(law.alpha, law.b, law.m, y);
  if (d_[subject] == 1) {
    ll += std::log(law.alpha * law.b) + (law.alpha - 1.0) * std::log(y) + law.m * y;
  }
  return ll;
}

double TlOsModel::ranef_logpdf(const double* theta, int subject) const {
  return bvn_logpdf(theta[off_b_ + 2 * subject], theta[off_b_ + 2 * subject + 1],
                    theta[off_s1_], theta[off_s2_], theta[off_rho_]);
}

double TlOsModel::os_loglik(const double* theta, int subject) const {
  const EventLaw law = subject_event_law(theta, subject);
  const double y = std::max(y_[subject], 1e-10);
  double ll = -weibull_exp_linear_chaz(law.alpha, law.b, law.m, y);
  if (d_[subject] == 1) {
    ll += std::log(law.alpha * law.b) + (law.alpha - 1.0) * std::log(y) + law.m * y;
  }
  return ll;
}

}  // namespace osm
