#include "osm/models/multistate.hpp"

#include <cmath>

#include "osm/common.hpp"
#include "osm/models/design.hpp"
#include "osm/stats.hpp"

namespace osm {

MultistateModel::MultistateModel(const TrialSnapshot& snap) {
  x_ = hazard_design(snap);
  ids_ = collect_ids(snap);
  std::vector<double> prog_durations, post_durations;
  for (const auto& s : snap.subjects) {
    // single clock time for unprogressed subjects is the os follow-up
    const double t1 = s.progression.indicator == 1 ? s.progression.time : s.os.time;
    t1_.push_back(t1);
    dprog_.push_back(s.progression.indicator);
    yos_.push_back(s.os.time);
    dos_.push_back(s.os.indicator);
    prog_durations.push_back(t1);
    if (s.progression.indicator == 1) post_durations.push_back(s.os.time - s.progression.time);
  }
  const int pz = static_cast<int>(x_.front().size());
  const char* tr[3] = {"01", "02", "12"};
  const double init_scale[3] = {mean_positive_time(prog_durations),
                                mean_positive_time(prog_durations),
                                mean_positive_time(post_durations)};
  space_.add({"alpha", 1, 1, Support::Positive, Role::Global, Kind::Shape, 1.0});
  for (int e = 0; e < 3; ++e) {
    space_.add({std::string("gamma_") + tr[e], 1, 1, Support::Positive, Role::Global,
                Kind::AftScale, init_scale[e]});
    space_.add({std::string("beta_") + tr[e], pz, 1, Support::Real, Role::Global,
                Kind::Coefficient, 0.0});
  }
  off_alpha_ = space_.offset(space_.find("alpha"));
  for (int e = 0; e < 3; ++e) {
    off_gamma_[e] = space_.offset(space_.find(std::string("gamma_") + tr[e]));
    const int j = space_.find(std::string("beta_") + tr[e]);
    off_beta_[e] = j >= 0 ? space_.offset(j) : -1;
  }
}

MultistateModel::Rates MultistateModel::subject_rates(const double* theta, int subject) const {
  const double alpha = theta[off_alpha_];
  double b[3];
  for (int e = 0; e < 3; ++e) {
    const double lin = off_beta_[e] >= 0 ? dot_row(x_[subject], theta + off_beta_[e]) : 0.0;
    b[e] = std::exp(-alpha * (std::log(theta[off_gamma_[e]]) + lin));
  }
  return {alpha, b[0], b[1], b[2]};
}

int MultistateModel::state_at_followup(int subject) const {
  return dprog_[subject] == 1 ? 1 : 0;
}

double MultistateModel::data_loglik(const double* theta, int subject) const {
  const Rates r = subject_rates(theta, subject);
  const double a = r.alpha;
  const double t1 = std::max(t1_[subject], 1e-10);
  const double t1a = std::pow(t1, a);
  const double log_t1 = std::log(t1);

  if (dprog_[subject] == 1) {
    // progressed at t1, then follow-up of t2 on the reset clock
    const double t2 = std::max(yos_[subject] - t1_[subject], 1e-10);
    const double t2a = std::pow(t2, a);
    double ll = std::log(a * r.b01) + (a - 1.0) * log_t1 - r.b01 * t1a  // f1(t1)
                - r.b02 * t1a                                          // S2(t1)
                - r.b12 * t2a;                                         // S3(t2)
    if (dos_[subject] == 1) ll += std::log(a * r.b12) + (a - 1.0) * std::log(t2);
    return ll;
  }
  double ll = -(r.b01 + r.b02) * t1a;  // S1 S2
  if (dos_[subject] == 1) ll += std::log(a * r.b02) + (a - 1.0) * log_t1;
  return ll;
}

namespace {

// J = int_0^{delta^alpha} exp(-B u) g(u) du by composite GL in u.
template <typename G>
double composite_u_integral(double alpha, double delta, double B, const G& g, int panels) {
  const double U = std::pow(delta, alpha);
  if (U <= 0.0) return 0.0;
  const GlRule& rule = gl_rule(8);
  const double h = U / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double u0 = p * h;
    double s = 0.0;
    for (size_t i = 0; i < rule.nodes.size(); ++i) {
      const double u = u0 + h * rule.nodes[i];
      s += rule.weights[i] * std::exp(-B * u) * g(u);
    }
    total += s * h;
  }
  return total;
}

}  // namespace

std::array<double, 3> ms_transition_row(const MultistateModel::Rates& r, int from, double t1,
                                        double t2) {
  if (t2 < t1) throw NumericalError("transition interval reversed");
  const double delta = t2 - t1;
  if (from == 2) return {0.0, 0.0, 1.0};
  if (delta == 0.0) {
    std::array<double, 3> row{0.0, 0.0, 0.0};
    row[from] = 1.0;
    return row;
  }
  const double a = r.alpha;
  constexpr int kPanels = 64;
  if (from == 1) {
    const double p11 = std::exp(-r.b12 * std::pow(delta, a));
    const double p12 =
        r.b12 * composite_u_integral(a, delta, r.b12, [](double) { return 1.0; }, kPanels);
    return {0.0, p11, p12};
  }
  const double B = r.b01 + r.b02;
  const double p00 = std::exp(-B * std::pow(delta, a));
  // survival in state 1 from progression at duration u until delta
  const auto tail = [&](double u) {
    const double rem = delta - std::pow(u, 1.0 / a);
    return std::exp(-r.b12 * std::pow(std::max(rem, 0.0), a));
  };
  const double j0 = composite_u_integral(a, delta, B, [](double) { return 1.0; }, kPanels);
  const double j1 = composite_u_integral(a, delta, B, tail, kPanels);
  const double p01 = r.b01 * j1;
  const double p02 = r.b02 * j0 + r.b01 * (j0 - j1);
  return {p00, p01, p02};
}

}  // namespace osm
