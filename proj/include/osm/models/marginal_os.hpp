#pragma once

#include "osm/mcmc.hpp"
#include "osm/stats.hpp"
#include "osm/trial_data.hpp"

namespace osm {

// Weibull proportional-hazards model for overall survival alone:
//   h_i(t) = alpha * gamma * t^(alpha-1) * exp(z_i' beta)
class MarginalOsModel : public SubjectModel {
 public:
  explicit MarginalOsModel(const TrialSnapshot& snap);

  const ParameterSpace& space() const override { return space_; }
  int subject_count() const override { return static_cast<int>(y_.size()); }
  double data_loglik(const double* theta, int subject) const override;
  double ranef_logpdf(const double*, int) const override { return 0.0; }
  std::vector<std::string> subject_ids() const override { return ids_; }

  WeibullHazard subject_hazard(const double* theta, int subject) const;
  double follow_up(int subject) const { return y_[subject]; }

 private:
  ParameterSpace space_;
  std::vector<std::vector<double>> z_;
  std::vector<double> y_;
  std::vector<int> d_;
  std::vector<std::string> ids_;
  int off_alpha_ = 0, off_gamma_ = 0, off_beta_ = -1;
};

}  // namespace osm
