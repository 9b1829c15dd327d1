#pragma once

#include <string>

#include "osm/mcmc.hpp"
#include "osm/stats.hpp"
#include "osm/trial_data.hpp"

namespace osm {

// Which progression surrogate pairs with OS.
enum class PairKind { NT, NL, TTP };

std::string pair_kind_name(PairKind k);

// Bivariate Clayton copula linking a progression component A to OS. Each
// margin is Weibull PH with a per-subject additive scale frailty:
//   H_A(t) = (gamma_A + b_iA) * exp(z' beta_A) * t^alpha_A,  b_iA ~ N(0, sigma_bA^2)
// and the pair likelihood follows the four censoring patterns of the joint
// survival C(S_A, S_OS) = (S_A^-eta + S_OS^-eta - 1)^(-1/eta).
class ClaytonPairModel : public SubjectModel {
 public:
  ClaytonPairModel(const TrialSnapshot& snap, PairKind which);

  const ParameterSpace& space() const override { return space_; }
  int subject_count() const override { return static_cast<int>(ya_.size()); }
  double data_loglik(const double* theta, int subject) const override;
  double ranef_logpdf(const double* theta, int subject) const override;
  // Pair likelihood minus the A-margin term: log f(OS part | A part). The
  // A-margin factor is log f_A(y_A) when A is observed, log S_A(y_A) otherwise.
  double os_loglik(const double* theta, int subject) const override;
  std::vector<std::string> subject_ids() const override { return ids_; }

  PairKind kind() const { return kind_; }
  double eta(const double* theta) const { return theta[off_eta_]; }
  // Margins for one subject at one draw; returns false when a frailty pushes a
  // scale non-positive (impossible in kept draws, guarded anyway).
  bool subject_margins(const double* theta, int subject, WeibullHazard* a,
                       WeibullHazard* os) const;
  double comp_time(int subject) const { return ya_[subject]; }
  int comp_event(int subject) const { return da_[subject]; }
  double os_time(int subject) const { return yos_[subject]; }

 private:
  PairKind kind_;
  ParameterSpace space_;
  std::vector<std::vector<double>> z_;
  std::vector<double> ya_, yos_;
  std::vector<int> da_, dos_;
  std::vector<std::string> ids_;
  int off_alpha_a_ = 0, off_gamma_a_ = 0, off_beta_a_ = -1, off_sigma_a_ = 0, off_b_a_ = 0;
  int off_alpha_os_ = 0, off_gamma_os_ = 0, off_beta_os_ = -1, off_sigma_os_ = 0, off_b_os_ = 0;
  int off_eta_ = 0;
};

}  // namespace osm
