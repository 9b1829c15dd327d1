#pragma once

#include <functional>
#include <vector>

namespace osm {

// ---------------------------------------------------------------------------
// Weibull hazard kernel shared by every event model:
//   h(t) = alpha * b * t^(alpha-1),  H(t) = b * t^alpha,  S(t) = exp(-H(t)).
// Each model maps its own parameterization onto (alpha, b).
// ---------------------------------------------------------------------------

struct WeibullHazard {
  double alpha;  // shape > 0
  double b;      // rate scale > 0
};

double weibull_cumhaz(const WeibullHazard& h, double t);
double weibull_survival(const WeibullHazard& h, double t);
double weibull_log_hazard(const WeibullHazard& h, double t);
double weibull_logpdf(const WeibullHazard& h, double t);

// Quantile of T | T > t0 at probability u in [0,1):
//   t = (t0^alpha - log(1-u)/b)^(1/alpha)
double weibull_inverse_truncated(const WeibullHazard& h, double u, double t0);

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature.
// ---------------------------------------------------------------------------

// Nodes/weights for the reference interval [0,1]; cached per n.
struct GlRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GlRule& gl_rule(int n);

// \int_0^t_end exp(log_hazard(s)) ds with a single n-node panel.
double gauss_legendre_chaz(const std::function<double(double)>& log_hazard, double t_end,
                           int n_nodes = 15);

// b * \int_0^t alpha s^(alpha-1) exp(m s) ds.
// Substitution s = t * x^q with q = max(1, ceil(4/alpha)) removes the endpoint
// singularity; two 15-node panels hold relative error near 1e-10 across the
// shapes and slopes that arise in the joint model.
double weibull_exp_linear_chaz(double alpha, double b, double m, double t_end);

// Smallest t such that weibull_exp_linear_chaz(..., t) >= target, searched on
// [t_lo, t_hi] (monotone); Newton with bisection safeguard.
double weibull_exp_linear_invert(double alpha, double b, double m, double target, double t_lo,
                                 double t_hi);

// ---------------------------------------------------------------------------
// Posterior summaries.
// ---------------------------------------------------------------------------

struct HpdInterval {
  double lo;
  double hi;
};

// Shortest interval containing ceil(mass*n) sorted draws. Requires >= 10 draws.
HpdInterval hpd_interval(std::vector<double> draws, double mass);

// Split-Rhat over >= 2 chains of equal length.
double gelman_rubin_rhat(const std::vector<std::vector<double>>& chains);

double median_of(std::vector<double> draws);
double quantile_of(std::vector<double> draws, double p);  // type-7 interpolation

// Kendall tau via Knight's O(n log n) merge-sort inversion count (no ties).
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Density helpers.
// ---------------------------------------------------------------------------

double normal_cdf(double z);
double normal_logpdf(double x, double mu, double sd);
// Zero-mean bivariate normal with standard deviations s1, s2, correlation rho.
double bvn_logpdf(double x1, double x2, double s1, double s2, double rho);

// log(exp(a) + exp(b)) computed stably.
double log_add_exp(double a, double b);

// ---------------------------------------------------------------------------
// Clayton copula in survival form. All functions work on log survival values
// lu = log S_A(t_A) <= 0, lv = log S_OS(t_OS) <= 0.
//   S(t_A, t_OS) = (S_A^-eta + S_OS^-eta - 1)^(-1/eta),  tau = eta / (eta + 2)
// ---------------------------------------------------------------------------

namespace clayton {

// log(u^-eta + v^-eta - 1), stable for eta*H small and large.
double log_psi_sum(double eta, double lu, double lv);

// log joint survival (doubly-censored likelihood contribution).
double log_joint_survival(double eta, double lu, double lv);

// log P(U_OS < v | U_A = u): conditional survival of OS past the time with
// S_OS = v, given the component event observed exactly at S_A = u.
double log_cond_given_event(double eta, double lu, double lv);

// log P(U_OS < v | U_A < a): same given only that the component survived past
// the time with S_A = a.
double log_cond_given_censored(double eta, double la, double lv);

// Inverse of log_cond_given_event in v: returns lv with
// log_cond_given_event(eta, lu, lv) = lw, for lw = log(w) <= 0.
double invert_cond_given_event(double eta, double lu, double lw);

// Inverse of log_cond_given_censored in v: returns lv.
double invert_cond_given_censored(double eta, double la, double lw);

}  // namespace clayton

}  // namespace osm
