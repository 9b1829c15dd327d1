#include "osm/models/clayton_pair.hpp"

#include <cmath>
#include <limits>

#include "osm/common.hpp"
#include "osm/models/design.hpp"

namespace osm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kEtaIndep = 1e-10;  // below this the pair factorizes
}  // namespace

std::string pair_kind_name(PairKind k) {
  switch (k) {
    case PairKind::NT: return "nt";
    case PairKind::NL: return "nl";
    case PairKind::TTP: return "ttp";
  }
  return "?";
}

ClaytonPairModel::ClaytonPairModel(const TrialSnapshot& snap, PairKind which) : kind_(which) {
  z_ = hazard_design(snap);
  ids_ = collect_ids(snap);
  for (const auto& s : snap.subjects) {
    const EventTime& a = which == PairKind::NT ? s.nt : (which == PairKind::NL ? s.nl : s.ttp);
    ya_.push_back(a.time);
    da_.push_back(a.indicator);
    yos_.push_back(s.os.time);
    dos_.push_back(s.os.indicator);
  }
  const std::string p = pair_kind_name(which);
  const int pz = static_cast<int>(z_.front().size());
  const int n = subject_count();
  space_.add({"alpha_" + p, 1, 1, Support::Positive, Role::Global, Kind::Shape, 1.0});
  space_.add({"gamma_" + p, 1, 1, Support::Positive, Role::Global, Kind::RateScale,
              1.0 / mean_positive_time(ya_)});
  space_.add({"beta_" + p, pz, 1, Support::Real, Role::Global, Kind::Coefficient, 0.0});
  space_.add({"sigma_b_" + p, 1, 1, Support::Positive, Role::Global, Kind::StdDev, 1.0});
  space_.add({"b_" + p, n, 1, Support::Real, Role::PerSubject, Kind::RandomEffect, 0.0});
  space_.add({"alpha_os", 1, 1, Support::Positive, Role::Global, Kind::Shape, 1.0});
  space_.add({"gamma_os", 1, 1, Support::Positive, Role::Global, Kind::RateScale,
              1.0 / mean_positive_time(yos_)});
  space_.add({"beta_os", pz, 1, Support::Real, Role::Global, Kind::Coefficient, 0.0});
  space_.add({"sigma_b_os", 1, 1, Support::Positive, Role::Global, Kind::StdDev, 1.0});
  space_.add({"b_os", n, 1, Support::Real, Role::PerSubject, Kind::RandomEffect, 0.0});
  space_.add({"eta", 1, 1, Support::Positive, Role::Global, Kind::Dependence, 1.0});

  off_alpha_a_ = space_.offset(space_.find("alpha_" + p));
  off_gamma_a_ = space_.offset(space_.find("gamma_" + p));
  off_beta_a_ = space_.find("beta_" + p) >= 0 ? space_.offset(space_.find("beta_" + p)) : -1;
  off_sigma_a_ = space_.offset(space_.find("sigma_b_" + p));
  off_b_a_ = space_.offset(space_.find("b_" + p));
  off_alpha_os_ = space_.offset(space_.find("alpha_os"));
  off_gamma_os_ = space_.offset(space_.find("gamma_os"));
  off_beta_os_ = space_.find("beta_os") >= 0 ? space_.offset(space_.find("beta_os")) : -1;
  off_sigma_os_ = space_.offset(space_.find("sigma_b_os"));
  off_b_os_ = space_.offset(space_.find("b_os"));
  off_eta_ = space_.offset(space_.find("eta"));
}

bool ClaytonPairModel::subject_margins(const double* theta, int subject, WeibullHazard* a,
                                       WeibullHazard* os) const {
  const double ga = theta[off_gamma_a_] + theta[off_b_a_ + subject];
  const double gos = theta[off_gamma_os_] + theta[off_b_os_ + subject];
  if (!(ga > 0.0) || !(gos > 0.0)) return false;
  const double lin_a = off_beta_a_ >= 0 ? dot_row(z_[subject], theta + off_beta_a_) : 0.0;
  const double lin_os = off_beta_os_ >= 0 ? dot_row(z_[subject], theta + off_beta_os_) : 0.0;
  *a = {theta[off_alpha_a_], ga * std::exp(lin_a)};
  *os = {theta[off_alpha_os_], gos * std::exp(lin_os)};
  return true;
}

double ClaytonPairModel::data_loglik(const double* theta, int subject) const {
  WeibullHazard ha{}, hos{};
  if (!subject_margins(theta, subject, &ha, &hos)) return kNegInf;
  const double eta = theta[off_eta_];
  const double ya = std::max(ya_[subject], 1e-10);
  const double yos = std::max(yos_[subject], 1e-10);
  const double Ha = weibull_cumhaz(ha, ya);
  const double Hos = weibull_cumhaz(hos, yos);
  const int da = da_[subject], dos = dos_[subject];

  if (eta < kEtaIndep) {
    double ll = -Ha - Hos;
    if (da == 1) ll += weibull_log_hazard(ha, ya);
    if (dos == 1) ll += weibull_log_hazard(hos, yos);
    return ll;
  }

  const double log_a = clayton::log_psi_sum(eta, -Ha, -Hos);
  if (da == 1 && dos == 1) {
    return std::log1p(eta) + (eta + 1.0) * (Ha + Hos) - (2.0 * eta + 1.0) / eta * log_a +
           weibull_log_hazard(ha, ya) - Ha + weibull_log_hazard(hos, yos) - Hos;
  }
  if (da == 1) {
    return (eta + 1.0) * Ha - (eta + 1.0) / eta * log_a + weibull_log_hazard(ha, ya) - Ha;
  }
  if (dos == 1) {
    return (eta + 1.0) * Hos - (eta + 1.0) / eta * log_a + weibull_log_hazard(hos, yos) - Hos;
  }
  return -log_a / eta;
}

double ClaytonPairModel::ranef_logpdf(const double* theta, int subject) const {
  return normal_logpdf(theta[off_b_a_ + subject], 0.0, theta[off_sigma_a_]) +
         normal_logpdf(theta[off_b_os_ + subject], 0.0, theta[off_sigma_os_]);
}

double ClaytonPairModel::os_loglik(const double* theta, int subject) const {
  WeibullHazard ha{}, hos{};
  if (!subject_margins(theta, subject, &ha, &hos)) return kNegInf;
  const double ya = std::max(ya_[subject], 1e-10);
  const double Ha = weibull_cumhaz(ha, ya);
  const double log_marg_a = da_[subject] == 1 ? weibull_log_hazard(ha, ya) - Ha : -Ha;
  return data_loglik(theta, subject) - log_marg_a;
}

}  // namespace osm
