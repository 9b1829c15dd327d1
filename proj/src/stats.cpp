#include "osm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>

#include "osm/common.hpp"

namespace osm {

double weibull_cumhaz(const WeibullHazard& h, double t) {
  return t <= 0.0 ? 0.0 : h.b * std::pow(t, h.alpha);
}

double weibull_survival(const WeibullHazard& h, double t) {
  return std::exp(-weibull_cumhaz(h, t));
}

double weibull_log_hazard(const WeibullHazard& h, double t) {
  return std::log(h.alpha * h.b) + (h.alpha - 1.0) * std::log(t);
}

double weibull_logpdf(const WeibullHazard& h, double t) {
  return weibull_log_hazard(h, t) - weibull_cumhaz(h, t);
}

double weibull_inverse_truncated(const WeibullHazard& h, double u, double t0) {
  const double base = t0 <= 0.0 ? 0.0 : std::pow(t0, h.alpha);
  return std::pow(base - std::log1p(-u) / h.b, 1.0 / h.alpha);
}

// ---------------------------------------------------------------------------

const GlRule& gl_rule(int n) {
  static std::map<int, GlRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  // Newton iteration on P_n, nodes mapped from [-1,1] to [0,1].
  GlRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p0 / pp;
      if (std::fabs(z - z1) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.nodes[i] = 0.5 * (1.0 - z);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

double gauss_legendre_chaz(const std::function<double(double)>& log_hazard, double t_end,
                           int n_nodes) {
  if (t_end <= 0.0) return 0.0;
  const GlRule& rule = gl_rule(n_nodes);
  double sum = 0.0;
  for (int i = 0; i < n_nodes; ++i) {
    sum += rule.weights[i] * std::exp(log_hazard(rule.nodes[i] * t_end));
  }
  return sum * t_end;
}

double weibull_exp_linear_chaz(double alpha, double b, double m, double t_end) {
  if (t_end <= 0.0) return 0.0;
  if (m == 0.0) return b * std::pow(t_end, alpha);
  // s = t * x^q turns alpha*s^(alpha-1) ds into alpha*q*t^alpha * x^(q*alpha-1) dx
  const int q = std::max(1, static_cast<int>(std::ceil(4.0 / alpha)));
  const GlRule& rule = gl_rule(15);
  const double qa = q * alpha;
  double sum = 0.0;
  for (int panel = 0; panel < 2; ++panel) {
    const double x0 = 0.5 * panel;
    for (size_t i = 0; i < rule.nodes.size(); ++i) {
      const double x = x0 + 0.5 * rule.nodes[i];
      sum += 0.5 * rule.weights[i] * std::pow(x, qa - 1.0) * std::exp(m * t_end * std::pow(x, q));
    }
  }
  return b * alpha * q * std::pow(t_end, alpha) * sum;
}

double weibull_exp_linear_invert(double alpha, double b, double m, double target, double t_lo,
                                 double t_hi) {
  double flo = weibull_exp_linear_chaz(alpha, b, m, t_lo) - target;
  double fhi = weibull_exp_linear_chaz(alpha, b, m, t_hi) - target;
  if (flo > 0.0) return t_lo;
  if (fhi < 0.0) return t_hi;
  double t = std::pow(std::max(t_lo, 1e-300), alpha);
  // Newton start from the m=0 solution
  t = std::pow(std::pow(t_lo, alpha) + (target - weibull_exp_linear_chaz(alpha, b, m, t_lo)) / b,
               1.0 / alpha);
  if (!(t > t_lo && t < t_hi)) t = 0.5 * (t_lo + t_hi);
  double lo = t_lo, hi = t_hi;
  for (int iter = 0; iter < 200; ++iter) {
    const double f = weibull_exp_linear_chaz(alpha, b, m, t) - target;
    if (f > 0.0) {
      hi = t;
    } else {
      lo = t;
    }
    if (std::fabs(f) < 1e-12 * (1.0 + std::fabs(target)) || hi - lo < 1e-13 * (1.0 + hi)) {
      return t;
    }
    const double hazard = alpha * b * std::pow(t, alpha - 1.0) * std::exp(m * t);
    double step = t - f / hazard;
    if (!(step > lo && step < hi)) step = 0.5 * (lo + hi);
    t = step;
  }
  return t;
}

// ---------------------------------------------------------------------------

HpdInterval hpd_interval(std::vector<double> draws, double mass) {
  if (draws.size() < 10) throw NumericalError("hpd_interval needs at least 10 draws");
  if (!(mass > 0.0 && mass <= 1.0)) throw NumericalError("hpd_interval mass must be in (0,1]");
  std::sort(draws.begin(), draws.end());
  const int n = static_cast<int>(draws.size());
  const int m = std::min(n, static_cast<int>(std::ceil(mass * n)));
  int best = 0;
  double best_width = draws[m - 1] - draws[0];
  for (int i = 1; i + m <= n; ++i) {
    const double w = draws[i + m - 1] - draws[i];
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  return {draws[best], draws[best + m - 1]};
}

double gelman_rubin_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw NumericalError("gelman_rubin_rhat needs at least 2 chains");
  const size_t len = chains[0].size();
  for (const auto& c : chains) {
    if (c.size() != len) throw NumericalError("gelman_rubin_rhat: chains of unequal length");
  }
  const size_t half = len / 2;
  if (half < 2) throw NumericalError("gelman_rubin_rhat: chains too short");

  std::vector<double> means, vars;
  for (const auto& c : chains) {
    for (int part = 0; part < 2; ++part) {
      const size_t begin = part * half;
      double mean = 0.0;
      for (size_t i = 0; i < half; ++i) mean += c[begin + i];
      mean /= half;
      double var = 0.0;
      for (size_t i = 0; i < half; ++i) {
        const double d = c[begin + i] - mean;
        var += d * d;
      }
      var /= (half - 1);
      means.push_back(mean);
      vars.push_back(var);
    }
  }
  const size_t m = means.size();
  double w = 0.0;
  for (double v : vars) w += v;
  w /= m;
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(half) / (m - 1);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (static_cast<double>(half) - 1.0) / half * w + b / half;
  return std::sqrt(var_plus / w);
}

double median_of(std::vector<double> draws) {
  std::sort(draws.begin(), draws.end());
  const size_t n = draws.size();
  if (n == 0) throw NumericalError("median of empty vector");
  return n % 2 == 1 ? draws[n / 2] : 0.5 * (draws[n / 2 - 1] + draws[n / 2]);
}

double quantile_of(std::vector<double> draws, double p) {
  if (draws.empty()) throw NumericalError("quantile of empty vector");
  std::sort(draws.begin(), draws.end());
  const double h = (draws.size() - 1) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, draws.size() - 1);
  return draws[lo] + (h - lo) * (draws[hi] - draws[lo]);
}

namespace {

// counts inversions by merge sort
std::uint64_t merge_count(std::vector<double>& a, std::vector<double>& buf, size_t lo, size_t hi) {
  if (hi - lo < 2) return 0;
  const size_t mid = (lo + hi) / 2;
  std::uint64_t cnt = merge_count(a, buf, lo, mid) + merge_count(a, buf, mid, hi);
  size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      cnt += mid - i;
      buf[k++] = a[j++];
    } else {
      buf[k++] = a[i++];
    }
  }
  while (i < mid) buf[k++] = a[i++];
  while (j < hi) buf[k++] = a[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, a.begin() + lo);
  return cnt;
}

}  // namespace

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n != y.size() || n < 2) throw NumericalError("kendall_tau: need paired samples, n >= 2");
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });
  std::vector<double> ys(n);
  for (size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  std::vector<double> buf(n);
  const std::uint64_t inv = merge_count(ys, buf, 0, n);
  const double total = 0.5 * static_cast<double>(n) * (n - 1);
  return 1.0 - 2.0 * static_cast<double>(inv) / total;
}

// ---------------------------------------------------------------------------

double normal_cdf(double z) { return 0.5 * std::erfc(-z / M_SQRT2); }

double normal_logpdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

double bvn_logpdf(double x1, double x2, double s1, double s2, double rho) {
  const double z1 = x1 / s1;
  const double z2 = x2 / s2;
  const double omr2 = 1.0 - rho * rho;
  const double q = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / omr2;
  return -0.5 * q - std::log(2.0 * M_PI * s1 * s2) - 0.5 * std::log(omr2);
}

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  if (!std::isfinite(m)) return m;
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// ---------------------------------------------------------------------------

namespace clayton {

static constexpr double kEtaTiny = 1e-12;

double log_psi_sum(double eta, double lu, double lv) {
  const double x = -eta * lu;  // = eta * H_A >= 0
  const double y = -eta * lv;
  const double m = std::max(x, y);
  if (m < 30.0) return std::log1p(std::expm1(x) + std::expm1(y));
  return m + std::log(std::exp(x - m) + std::exp(y - m) - std::exp(-m));
}

double log_joint_survival(double eta, double lu, double lv) {
  if (eta < kEtaTiny) return lu + lv;
  return -log_psi_sum(eta, lu, lv) / eta;
}

double log_cond_given_event(double eta, double lu, double lv) {
  if (eta < kEtaTiny) return lv;
  return -(eta + 1.0) * lu - (eta + 1.0) / eta * log_psi_sum(eta, lu, lv);
}

double log_cond_given_censored(double eta, double la, double lv) {
  if (eta < kEtaTiny) return lv;
  return -log_psi_sum(eta, la, lv) / eta - la;
}

double invert_cond_given_event(double eta, double lu, double lw) {
  if (eta < kEtaTiny) return lw;
  const double g = -eta / (1.0 + eta) * lw;  // >= 0
  const double c = std::expm1(g);
  if (c <= 0.0) return 0.0;  // w == 1 -> v = 1
  const double log_t1 = -eta * lu + std::log(c);
  return -log_add_exp(log_t1, 0.0) / eta;
}

double invert_cond_given_censored(double eta, double la, double lw) {
  if (eta < kEtaTiny) return lw;
  const double c = std::expm1(-eta * lw);  // w^-eta - 1 >= 0
  if (c <= 0.0) return 0.0;
  const double log_t1 = -eta * la + std::log(c);
  return -log_add_exp(log_t1, 0.0) / eta;
}

}  // namespace clayton

}  // namespace osm
