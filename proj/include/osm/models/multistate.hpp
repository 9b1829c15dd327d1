#pragma once

#include <array>

#include "osm/mcmc.hpp"
#include "osm/trial_data.hpp"

namespace osm {

// Illness-death model (0 randomized, 1 progressed, 2 dead) with semi-Markov
// Weibull intensities sharing one shape:
//   pi_01(t) = alpha (1/g01_i)^alpha t^(alpha-1),  g_kl,i = gamma_kl exp(x_i' beta_kl)
// and the 1->2 clock restarting at progression.
class MultistateModel : public SubjectModel {
 public:
  explicit MultistateModel(const TrialSnapshot& snap);

  const ParameterSpace& space() const override { return space_; }
  int subject_count() const override { return static_cast<int>(t1_.size()); }
  double data_loglik(const double* theta, int subject) const override;
  double ranef_logpdf(const double*, int) const override { return 0.0; }
  std::vector<std::string> subject_ids() const override { return ids_; }

  struct Rates {
    double alpha;
    double b01, b02, b12;  // canonical Weibull rates (1/g)^alpha
  };
  Rates subject_rates(const double* theta, int subject) const;

  // Observed state at the end of follow-up and the clock times needed by the
  // path sampler: t1 = progression (or follow-up) time, t2 = time since
  // progression under follow-up.
  int state_at_followup(int subject) const;  // 0 event-free, 1 progressed alive
  double prog_time(int subject) const { return t1_[subject]; }
  double follow_up(int subject) const { return yos_[subject]; }

 private:
  ParameterSpace space_;
  std::vector<std::vector<double>> x_;
  std::vector<double> t1_, yos_;
  std::vector<int> dprog_, dos_;
  std::vector<std::string> ids_;
  int off_alpha_ = 0;
  int off_gamma_[3] = {0, 0, 0};
  int off_beta_[3] = {-1, -1, -1};
};

// One row of the transition probability matrix for a homogeneous-duration
// interval: from state `from` over [t1, t2] (duration clock starts at t1).
// Row entries ordered {to 0, to 1, to 2}; integrals by composite 64-panel
// Gauss-Legendre after the u = s^alpha substitution.
std::array<double, 3> ms_transition_row(const MultistateModel::Rates& r, int from, double t1,
                                        double t2);

}  // namespace osm
