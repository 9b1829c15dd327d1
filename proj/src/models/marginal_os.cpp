#include "osm/models/marginal_os.hpp"

#include <cmath>

#include "osm/models/design.hpp"

namespace osm {

MarginalOsModel::MarginalOsModel(const TrialSnapshot& snap) {
  z_ = hazard_design(snap);
  ids_ = collect_ids(snap);
  for (const auto& s : snap.subjects) {
    y_.push_back(s.os.time);
    d_.push_back(s.os.indicator);
  }
  const int pz = static_cast<int>(z_.front().size());
  space_.add({"alpha_os", 1, 1, Support::Positive, Role::Global, Kind::Shape, 1.0});
  space_.add({"gamma_os", 1, 1, Support::Positive, Role::Global, Kind::RateScale,
              1.0 / mean_positive_time(y_)});
  space_.add({"beta_os", pz, 1, Support::Real, Role::Global, Kind::Coefficient, 0.0});
  off_alpha_ = space_.offset(space_.find("alpha_os"));
  off_gamma_ = space_.offset(space_.find("gamma_os"));
  off_beta_ = space_.find("beta_os") >= 0 ? space_.offset(space_.find("beta_os")) : -1;
}

WeibullHazard MarginalOsModel::subject_hazard(const double* theta, int subject) const {
  const double lin = off_beta_ >= 0 ? dot_row(z_[subject], theta + off_beta_) : 0.0;
  return {theta[off_alpha_], theta[off_gamma_] * std::exp(lin)};
}

double MarginalOsModel::data_loglik(const double* theta, int subject) const {
  const WeibullHazard h = subject_hazard(theta, subject);
  const double y = std::max(y_[subject], 1e-10);
  double ll = -weibull_cumhaz(h, y);
  if (d_[subject] == 1) ll += weibull_log_hazard(h, y);
  return ll;
}

}  // namespace osm
