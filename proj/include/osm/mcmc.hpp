#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace osm {

enum class Support { Real, Positive, Corr };  // Corr = open interval (-1, 1)
enum class Role { Global, PerSubject };

// Drives default priors and initial values.
enum class Kind {
  Coefficient,  // Normal(0, coef_sd)
  Association,  // Normal(0, assoc_sd)
  Shape,        // Exponential(shape_rate), init 1
  RateScale,    // Exponential(rate_scale_rate), init 1/mean(time)
  AftScale,     // HalfNormal(aft_scale_sd), init mean(time)
  Dependence,   // Exponential(dependence_rate), init 1
  StdDev,       // HalfNormal(sd_scale), init 1
  Correlation,  // Uniform(-1, 1), init 0
  RandomEffect  // density supplied by the model, init 0
};

struct Block {
  std::string name;
  int dim = 1;    // total scalar count (PerSubject: n_subjects * comps)
  int comps = 1;  // scalars per subject for PerSubject blocks
  Support support = Support::Real;
  Role role = Role::Global;
  Kind kind = Kind::Coefficient;
  double init = 0.0;  // constrained-scale initial value for every component
};

class ParameterSpace {
 public:
  void add(Block b);
  int dim() const { return dim_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const Block& block(int j) const { return blocks_[j]; }
  int offset(int j) const { return offsets_[j]; }
  int find(const std::string& name) const;  // -1 if absent
  // Flat index of component c of subject i in a per-subject block.
  int subject_slot(int block_idx, int subject, int comp) const;
  std::vector<std::string> flat_names(const std::vector<std::string>& subject_ids) const;

 private:
  std::vector<Block> blocks_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

struct PriorSpec {
  double coef_sd = 100.0;
  double assoc_sd = 1.0;
  double shape_rate = 1.0;
  double rate_scale_rate = 1.0;
  // Copula dependence lives on (0, inf) with plausible fits well above 1;
  // a rate of 0.1 keeps the exponential prior from dragging it toward 0.
  double dependence_rate = 0.1;
  double sd_scale = 10.0;
  double aft_scale_sd = 100.0;
  std::map<std::string, double> scale_override;  // block name -> scale/rate

  // Log prior density of one global block at constrained values; 0 for
  // RandomEffect blocks (the model owns those densities).
  double log_density(const Block& b, const double* x) const;
};

struct McmcSettings {
  int chains = 2;
  int adapt = 8000;
  int burn_in = 1000;
  int iters = 10000;
  std::uint64_t seed = 1;
  int threads = 1;
  double init_step = 0.5;
};

// Likelihood provider. theta is the full constrained parameter vector laid out
// by the model's ParameterSpace. Per-subject terms let the sampler update one
// subject's random effects without touching the rest.
class SubjectModel {
 public:
  virtual ~SubjectModel() = default;
  virtual const ParameterSpace& space() const = 0;
  virtual int subject_count() const = 0;
  virtual double data_loglik(const double* theta, int subject) const = 0;
  virtual double ranef_logpdf(const double* theta, int subject) const = 0;
  // Log density the model assigns to the subject's survival outcome alone,
  // conditional on the model's other observed components. Models whose data
  // space is just the survival outcome keep the default. Model averaging uses
  // this stream so submodels with different data spaces stay comparable.
  virtual double os_loglik(const double* theta, int subject) const {
    return data_loglik(theta, subject);
  }
  virtual std::vector<std::string> subject_ids() const { return {}; }
};

struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<int> global_index;        // flat indices of global parameters
  std::vector<Support> global_support;  // aligned with global_index
  int chains = 0;
  int iters = 0;  // kept per chain
  int dim = 0;
  std::vector<double> draws;     // [chain][iter][dim]
  std::vector<double> loglik;    // [chain][iter] data log-likelihood
  std::vector<double> logprior;  // [chain][iter] global-parameter prior density
  std::vector<double> logranef;  // [chain][iter] random-effect density
  std::vector<double> osloglik;  // [chain][iter] survival-outcome conditional log-likelihood
  std::map<std::string, double> acceptance;  // block -> rate over kept phase
  std::map<std::string, double> rhat;        // per global parameter (chains >= 2)
  bool converged = true;                     // all rhat < 1.1

  int n_kept() const { return chains * iters; }
  double at(int chain, int iter, int p) const {
    return draws[(static_cast<size_t>(chain) * iters + iter) * dim + p];
  }
  // merged chain-major draw index k in [0, n_kept)
  const double* draw(int k) const { return &draws[static_cast<size_t>(k) * dim]; }
  double stream_loglik(int k) const { return loglik[k]; }
  double stream_logprior(int k) const { return logprior[k]; }
  double stream_logranef(int k) const { return logranef[k]; }
  double stream_osloglik(int k) const { return osloglik[k]; }
};

// Constrained initial vector assembled from Block::init.
std::vector<double> initialize(const ParameterSpace& space);

// The sampler's working-scale transforms: log for positive supports, atanh
// for correlations, identity otherwise.
double to_constrained(Support s, double v);
double to_unconstrained(Support s, double x);

// Adaptive random-walk Metropolis-within-Gibbs on unconstrained scales.
// Scalar blocks target acceptance 0.44, joint blocks 0.23; scales adapt during
// the adaptation phase only, then stay frozen through burn-in and sampling.
PosteriorDraws run_mcmc(const SubjectModel& model, const PriorSpec& priors,
                        const McmcSettings& settings);

}  // namespace osm
