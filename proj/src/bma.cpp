#include "osm/bma.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "osm/common.hpp"
#include "osm/mcmc.hpp"

namespace osm {

double log_mvn_fit_at_mean(const std::vector<std::vector<double>>& draws) {
  if (draws.empty()) throw NumericalError("mvn fit needs draws");
  const int n = static_cast<int>(draws.size());
  const int d = static_cast<int>(draws.front().size());
  if (d == 0) return 0.0;  // no global parameters: density constant 1
  if (n < d + 2) throw NumericalError("mvn fit needs more draws than dimensions");

  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = draws[i][j];
  }
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
  Eigen::MatrixXd cov = (m.transpose() * m) / (n - 1.0);
  cov.diagonal().array() += 1e-10;

  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("mvn fit: covariance not PSD");
  double log_det = 0.0;
  for (int j = 0; j < d; ++j) log_det += std::log(llt.matrixL()(j, j));
  // density at the mean: quadratic form vanishes
  return -0.5 * d * std::log(2.0 * M_PI) - log_det;
}

BmaWeights compute_weights(const std::vector<BmaStream>& streams,
                           const std::vector<double>& prior_prob) {
  if (streams.empty()) throw ConfigError("compute_weights: no models");
  const int q_count = static_cast<int>(streams.size());
  const int n = static_cast<int>(streams.front().loglik.size());
  for (const auto& s : streams) {
    if (static_cast<int>(s.loglik.size()) != n || static_cast<int>(s.logprior.size()) != n) {
      throw DataError("compute_weights: mismatched iteration counts across models");
    }
  }
  std::vector<double> log_prior_model(q_count, -std::log(static_cast<double>(q_count)));
  if (!prior_prob.empty()) {
    if (static_cast<int>(prior_prob.size()) != q_count) {
      throw ConfigError("compute_weights: model prior length mismatch");
    }
    double total = 0.0;
    for (double p : prior_prob) {
      if (!(p > 0.0)) throw ConfigError("compute_weights: model priors must be positive");
      total += p;
    }
    for (int q = 0; q < q_count; ++q) log_prior_model[q] = std::log(prior_prob[q] / total);
  }

  BmaWeights out;
  out.n_iter = n;
  double g_total = 0.0;
  for (const auto& s : streams) {
    out.models.push_back(s.name);
    out.log_g.push_back(log_mvn_fit_at_mean(s.global_draws));
    g_total += out.log_g.back();
  }

  out.w.assign(static_cast<size_t>(n) * q_count, 0.0);
  out.mean_w.assign(q_count, 0.0);
  std::vector<double> score(q_count);
  for (int t = 0; t < n; ++t) {
    double m = -std::numeric_limits<double>::infinity();
    for (int q = 0; q < q_count; ++q) {
      score[q] = streams[q].loglik[t] + streams[q].logprior[t] + (g_total - out.log_g[q]) +
                 log_prior_model[q];
      m = std::max(m, score[q]);
    }
    double z = 0.0;
    for (int q = 0; q < q_count; ++q) z += std::exp(score[q] - m);
    for (int q = 0; q < q_count; ++q) {
      const double wq = std::exp(score[q] - m) / z;
      out.w[static_cast<size_t>(t) * q_count + q] = wq;
      out.mean_w[q] += wq / n;
    }
  }
  return out;
}

BmaStream make_stream(const std::string& name, const PosteriorDraws& draws) {
  BmaStream s;
  s.name = name;
  const int n = draws.n_kept();
  const size_t g = draws.global_index.size();
  s.loglik.resize(n);
  s.logprior.resize(n);
  s.global_draws.assign(n, std::vector<double>(g));
  for (int k = 0; k < n; ++k) {
    s.loglik[k] = draws.stream_osloglik(k);
    s.logprior[k] = draws.stream_logprior(k);
    const double* row = draws.draw(k);
    // global draws go in on the sampler's unconstrained scale, where the
    // normal fit behind the g_h plug-in is a faithful approximation
    for (size_t j = 0; j < g; ++j) {
      const Support sup = draws.global_support.empty() ? Support::Real : draws.global_support[j];
      s.global_draws[k][j] = to_unconstrained(sup, row[draws.global_index[j]]);
    }
  }
  return s;
}

}  // namespace osm
