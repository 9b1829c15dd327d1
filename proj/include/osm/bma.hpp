#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace osm {

// Per-model inputs to the weight computation: aligned per-iteration streams of
// the survival-outcome conditional log-likelihood (so models with different
// data spaces score the same outcome) and the global-parameter log prior
// density, plus the global draws for the plug-in posterior-density constant.
struct BmaStream {
  std::string name;
  std::vector<double> loglik;
  std::vector<double> logprior;
  std::vector<std::vector<double>> global_draws;  // [iter][param]
};

struct BmaWeights {
  std::vector<std::string> models;
  std::vector<double> log_g;   // plug-in log posterior density constants
  int n_iter = 0;
  std::vector<double> w;       // [iter][model], rows sum to 1
  std::vector<double> mean_w;  // per model

  double at(int iter, int q) const { return w[static_cast<size_t>(iter) * models.size() + q]; }
};

// Multivariate-normal fit to draws, log density evaluated at the fitted mean:
// -(d/2) log(2 pi) - (1/2) log|S|. Degenerate directions get a tiny jitter.
double log_mvn_fit_at_mean(const std::vector<std::vector<double>>& draws);

// Per-iteration model probabilities
//   w_q(t) oc exp{ loglik_q(t) + logprior_q(t) + sum_{h != q} log g_h + log P(M_q) }
// normalized in log space. prior_prob empty means uniform model priors.
BmaWeights compute_weights(const std::vector<BmaStream>& streams,
                           const std::vector<double>& prior_prob = {});

struct PosteriorDraws;

// Extracts the aligned per-iteration streams from a fitted model's draws.
// loglik is the survival-outcome conditional stream, not the full data one.
BmaStream make_stream(const std::string& name, const PosteriorDraws& draws);

}  // namespace osm
