#include "osm/models/spjm.hpp"

#include <cmath>

#include "osm/models/design.hpp"

namespace osm {

SpjmModel::SpjmModel(const TrialSnapshot& snap) {
  x_ = intercept_design(snap);
  ids_ = collect_ids(snap);
  for (const auto& s : snap.subjects) {
    tl_t_.push_back(s.tl_times);
    tl_v_.push_back(s.tl_values);
    ynt_.push_back(s.nt.time);
    dnt_.push_back(s.nt.indicator);
    ynl_.push_back(s.nl.time);
    dnl_.push_back(s.nl.indicator);
    yos_.push_back(s.os.time);
    dos_.push_back(s.os.indicator);
  }
  head_dim_ = static_cast<int>(x_.front().size());
  const int n = subject_count();
  space_.add({"beta0", head_dim_ + 1, 1, Support::Real, Role::Global, Kind::Coefficient, 0.0});
  space_.add({"sigma_y", 1, 1, Support::Positive, Role::Global, Kind::StdDev, 1.0});
  space_.add({"sigma_b1", 1, 1, Support::Positive, Role::Global, Kind::StdDev, 1.0});
  space_.add({"sigma_b2", 1, 1, Support::Positive, Role::Global, Kind::StdDev, 1.0});
  space_.add({"rho_b", 1, 1, Support::Corr, Role::Global, Kind::Correlation, 0.0});
  space_.add({"sigma_b3", 1, 1, Support::Positive, Role::Global, Kind::StdDev, 1.0});
  space_.add({"sigma_b4", 1, 1, Support::Positive, Role::Global, Kind::StdDev, 1.0});
  const char* ev[3] = {"nt", "nl", "os"};
  for (int e = 0; e < 3; ++e) {
    space_.add({std::string("alpha_") + ev[e], 1, 1, Support::Positive, Role::Global, Kind::Shape,
                1.0});
    space_.add({std::string("beta_") + ev[e], head_dim_, 1, Support::Real, Role::Global,
                Kind::Coefficient, 0.0});
  }
  space_.add({"phi", 8, 1, Support::Real, Role::Global, Kind::Association, 0.0});
  space_.add({"b", 4 * n, 4, Support::Real, Role::PerSubject, Kind::RandomEffect, 0.0});

  off_beta0_ = space_.offset(space_.find("beta0"));
  off_sigma_y_ = space_.offset(space_.find("sigma_y"));
  off_s1_ = space_.offset(space_.find("sigma_b1"));
  off_s2_ = space_.offset(space_.find("sigma_b2"));
  off_rho_ = space_.offset(space_.find("rho_b"));
  off_s3_ = space_.offset(space_.find("sigma_b3"));
  off_s4_ = space_.offset(space_.find("sigma_b4"));
  for (int e = 0; e < 3; ++e) {
    off_alpha_[e] = space_.offset(space_.find(std::string("alpha_") + ev[e]));
    off_beta_[e] = space_.offset(space_.find(std::string("beta_") + ev[e]));
  }
  off_phi_ = space_.offset(space_.find("phi"));
  off_b_ = space_.offset(space_.find("b"));
}

double SpjmModel::log_theta(const double* theta, int subject, int which) const {
  const double* b = theta + off_b_ + 4 * subject;
  const double* phi = theta + off_phi_;
  double lt = dot_row(x_[subject], theta + off_beta_[which]);
  switch (which) {
    case 0: lt += phi[0] * b[0] + phi[1] * b[1] + b[2]; break;
    case 1: lt += phi[2] * b[0] + phi[3] * b[1] + b[3]; break;
    default: lt += phi[4] * b[0] + phi[5] * b[1] + phi[6] * b[2] + phi[7] * b[3]; break;
  }
  return lt;
}

WeibullHazard SpjmModel::subject_os_hazard(const double* theta, int subject) const {
  return {theta[off_alpha_[2]], std::exp(log_theta(theta, subject, 2))};
}

double SpjmModel::data_loglik(const double* theta, int subject) const {
  const double* b = theta + off_b_ + 4 * subject;
  const double head = dot_row(x_[subject], theta + off_beta0_) + b[0];
  const double slope = theta[off_beta0_ + head_dim_] + b[1];
  const double sigma = theta[off_sigma_y_];

  double ll = 0.0;
  const auto& tt = tl_t_[subject];
  const auto& vv = tl_v_[subject];
  for (size_t j = 0; j < tt.size(); ++j) {
    ll += normal_logpdf(vv[j], head + slope * tt[j], sigma);
  }

  const double* times[3] = {&ynt_[0], &ynl_[0], &yos_[0]};
  const std::vector<int>* inds[3] = {&dnt_, &dnl_, &dos_};
  for (int e = 0; e < 3; ++e) {
    const double y = std::max(times[e][subject], 1e-10);
    const WeibullHazard h{theta[off_alpha_[e]], std::exp(log_theta(theta, subject, e))};
    ll -= weibull_cumhaz(h, y);
    if ((*inds[e])[subject] == 1) ll += weibull_log_hazard(h, y);
  }
  return ll;
}

double SpjmModel::ranef_logpdf(const double* theta, int subject) const {
  const double* b = theta + off_b_ + 4 * subject;
  return bvn_logpdf(b[0], b[1], theta[off_s1_], theta[off_s2_], theta[off_rho_]) +
         normal_logpdf(b[2], 0.0, theta[off_s3_]) + normal_logpdf(b[3], 0.0, theta[off_s4_]);
}

double SpjmModel::os_loglik(const double* theta, int subject) const {
  const double y = std::max(yos_[subject], 1e-10);
  const WeibullHazard h = subject_os_hazard(theta, subject);
  double ll = -weibull_cumhaz(h, y);
  if (dos_[subject] == 1) ll += weibull_log_hazard(h, y);
  return ll;
}

}  // namespace osm
