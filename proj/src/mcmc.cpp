#include "osm/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "osm/common.hpp"
#include "osm/stats.hpp"

namespace osm {

void ParameterSpace::add(Block b) {
  if (b.dim <= 0) return;  // absent block (e.g. empty covariate set)
  offsets_.push_back(dim_);
  dim_ += b.dim;
  blocks_.push_back(std::move(b));
}

int ParameterSpace::find(const std::string& name) const {
  for (size_t j = 0; j < blocks_.size(); ++j) {
    if (blocks_[j].name == name) return static_cast<int>(j);
  }
  return -1;
}

int ParameterSpace::subject_slot(int block_idx, int subject, int comp) const {
  const Block& b = blocks_[block_idx];
  return offsets_[block_idx] + subject * b.comps + comp;
}

std::vector<std::string> ParameterSpace::flat_names(
    const std::vector<std::string>& subject_ids) const {
  std::vector<std::string> names;
  names.reserve(dim_);
  for (const auto& b : blocks_) {
    if (b.role == Role::Global) {
      if (b.dim == 1) {
        names.push_back(b.name);
      } else {
        for (int c = 0; c < b.dim; ++c) {
          names.push_back(b.name + "[" + std::to_string(c) + "]");
        }
      }
    } else {
      const int n = b.dim / b.comps;
      for (int i = 0; i < n; ++i) {
        const std::string sid =
            i < static_cast<int>(subject_ids.size()) ? subject_ids[i] : std::to_string(i);
        if (b.comps == 1) {
          names.push_back(b.name + "[" + sid + "]");
        } else {
          for (int c = 0; c < b.comps; ++c) {
            names.push_back(b.name + "." + std::to_string(c) + "[" + sid + "]");
          }
        }
      }
    }
  }
  return names;
}

double PriorSpec::log_density(const Block& b, const double* x) const {
  const auto ov = scale_override.find(b.name);
  double lp = 0.0;
  switch (b.kind) {
    case Kind::Coefficient:
    case Kind::Association: {
      const double sd = ov != scale_override.end()
                            ? ov->second
                            : (b.kind == Kind::Coefficient ? coef_sd : assoc_sd);
      for (int c = 0; c < b.dim; ++c) lp += normal_logpdf(x[c], 0.0, sd);
      return lp;
    }
    case Kind::Shape:
    case Kind::RateScale:
    case Kind::Dependence: {
      const double rate =
          ov != scale_override.end()
              ? ov->second
              : (b.kind == Kind::Shape ? shape_rate
                                       : (b.kind == Kind::RateScale ? rate_scale_rate
                                                                    : dependence_rate));
      for (int c = 0; c < b.dim; ++c) lp += std::log(rate) - rate * x[c];
      return lp;
    }
    case Kind::StdDev:
    case Kind::AftScale: {
      const double s =
          ov != scale_override.end() ? ov->second : (b.kind == Kind::StdDev ? sd_scale : aft_scale_sd);
      for (int c = 0; c < b.dim; ++c) lp += std::log(2.0) + normal_logpdf(x[c], 0.0, s);
      return lp;
    }
    case Kind::Correlation:
      return -b.dim * std::log(2.0);
    case Kind::RandomEffect:
      return 0.0;
  }
  return 0.0;
}

std::vector<double> initialize(const ParameterSpace& space) {
  std::vector<double> theta(space.dim());
  for (int j = 0; j < space.block_count(); ++j) {
    const Block& b = space.block(j);
    for (int c = 0; c < b.dim; ++c) theta[space.offset(j) + c] = b.init;
  }
  return theta;
}

double to_constrained(Support s, double v) {
  switch (s) {
    case Support::Real: return v;
    case Support::Positive: return std::exp(v);
    case Support::Corr: return std::tanh(v);
  }
  return v;
}

double to_unconstrained(Support s, double x) {
  switch (s) {
    case Support::Real: return x;
    case Support::Positive:
      if (!(x > 0.0)) throw NumericalError("positive parameter initialized non-positive");
      return std::log(x);
    case Support::Corr:
      if (!(x > -1.0 && x < 1.0)) throw NumericalError("correlation initialized outside (-1,1)");
      return std::atanh(x);
  }
  return x;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_jacobian(Support s, double v, double x) {
  switch (s) {
    case Support::Real: return 0.0;
    case Support::Positive: return v;                      // d exp(v)/dv
    case Support::Corr: return std::log1p(-x * x);         // d tanh(v)/dv = 1 - x^2
  }
  return 0.0;
}

struct ChainResult {
  std::vector<double> draws;  // [iter][dim]
  std::vector<double> loglik, logprior, logranef, osloglik;
  std::vector<std::int64_t> accepted;  // per block
  std::vector<std::int64_t> proposed;
};

class ChainRunner {
 public:
  ChainRunner(const SubjectModel& model, const PriorSpec& priors, const McmcSettings& cfg,
              std::uint64_t seed)
      : model_(model),
        space_(model.space()),
        priors_(priors),
        cfg_(cfg),
        rng_(seed),
        n_(model.subject_count()) {
    const std::vector<double> theta0 = initialize(space_);
    theta_ = theta0;
    v_.resize(space_.dim());
    for (int j = 0; j < space_.block_count(); ++j) {
      const Block& b = space_.block(j);
      for (int c = 0; c < b.dim; ++c) {
        v_[space_.offset(j) + c] = to_unconstrained(b.support, theta_[space_.offset(j) + c]);
      }
    }
    data_ll_.resize(n_);
    ranef_ll_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      data_ll_[i] = model_.data_loglik(theta_.data(), i);
      ranef_ll_[i] = model_.ranef_logpdf(theta_.data(), i);
      if (!std::isfinite(data_ll_[i]) || !std::isfinite(ranef_ll_[i])) {
        throw NumericalError("non-finite log-posterior at initial values (subject " +
                             std::to_string(i) + ")");
      }
    }
    prior_.resize(space_.block_count());
    jac_.resize(space_.block_count());
    scales_.resize(space_.block_count());
    updates_.assign(space_.block_count(), 0);
    for (int j = 0; j < space_.block_count(); ++j) {
      const Block& b = space_.block(j);
      prior_[j] = b.role == Role::Global ? priors_.log_density(b, &theta_[space_.offset(j)]) : 0.0;
      jac_[j] = block_jacobian(j);
      scales_[j].assign(b.role == Role::PerSubject ? b.comps : 1, cfg_.init_step);
      if (!std::isfinite(prior_[j])) throw NumericalError("non-finite prior at initial values");
    }
  }

  ChainResult run() {
    ChainResult res;
    res.draws.reserve(static_cast<size_t>(cfg_.iters) * space_.dim());
    res.accepted.assign(space_.block_count(), 0);
    res.proposed.assign(space_.block_count(), 0);
    const int total = cfg_.adapt + cfg_.burn_in + cfg_.iters;
    for (int sweep = 0; sweep < total; ++sweep) {
      const bool adapting = sweep < cfg_.adapt;
      const bool keeping = sweep >= cfg_.adapt + cfg_.burn_in;
      for (int j = 0; j < space_.block_count(); ++j) {
        const Block& b = space_.block(j);
        if (b.role == Role::Global) {
          const bool acc = update_global(j);
          if (adapting) adapt_scale(j, 0, acc ? 1.0 : 0.0);
          if (keeping) {
            res.proposed[j] += 1;
            res.accepted[j] += acc ? 1 : 0;
          }
        } else {
          for (int c = 0; c < b.comps; ++c) {
            int acc_count = 0;
            for (int i = 0; i < n_; ++i) acc_count += update_subject(j, i, c) ? 1 : 0;
            if (adapting) adapt_scale(j, c, static_cast<double>(acc_count) / n_);
            if (keeping) {
              res.proposed[j] += n_;
              res.accepted[j] += acc_count;
            }
          }
        }
      }
      if (adapting) ++adapt_sweeps_;
      if (keeping) {
        res.draws.insert(res.draws.end(), theta_.begin(), theta_.end());
        res.loglik.push_back(sum(data_ll_));
        res.logranef.push_back(sum(ranef_ll_));
        double os = 0.0;
        for (int i = 0; i < n_; ++i) os += model_.os_loglik(theta_.data(), i);
        res.osloglik.push_back(os);
        double lp = 0.0;
        for (int j = 0; j < space_.block_count(); ++j) {
          if (space_.block(j).role == Role::Global) lp += prior_[j];
        }
        res.logprior.push_back(lp);
      }
    }
    return res;
  }

 private:
  static double sum(const std::vector<double>& x) {
    double s = 0.0;
    for (double xi : x) s += xi;  // fixed index order keeps reruns bit-identical
    return s;
  }

  double block_jacobian(int j) {
    const Block& b = space_.block(j);
    double s = 0.0;
    for (int c = 0; c < b.dim; ++c) {
      const int k = space_.offset(j) + c;
      s += log_jacobian(b.support, v_[k], theta_[k]);
    }
    return s;
  }

  void adapt_scale(int j, int unit, double acc_rate) {
    const Block& b = space_.block(j);
    const double target = (b.role == Role::Global && b.dim > 1) ? 0.23 : 0.44;
    const double step = std::min(0.25, 1.0 / std::sqrt(adapt_sweeps_ + 1.0));
    scales_[j][unit] *= std::exp(step * (acc_rate - target));
  }

  bool update_global(int j) {
    const Block& b = space_.block(j);
    const int off = space_.offset(j);
    const double s = scales_[j][0];

    std::vector<double> v_old(b.dim), x_old(b.dim);
    for (int c = 0; c < b.dim; ++c) {
      v_old[c] = v_[off + c];
      x_old[c] = theta_[off + c];
      v_[off + c] += s * rng_.normal();
      theta_[off + c] = to_constrained(b.support, v_[off + c]);
    }
    const double prior_new = priors_.log_density(b, &theta_[off]);
    const double jac_new = block_jacobian(j);

    double delta = prior_new + jac_new - prior_[j] - jac_[j];
    std::vector<double> data_new(n_), ranef_new(n_);
    bool finite = std::isfinite(delta);
    if (finite) {
      double old_sum = 0.0, new_sum = 0.0;
      for (int i = 0; i < n_; ++i) {
        data_new[i] = model_.data_loglik(theta_.data(), i);
        ranef_new[i] = model_.ranef_logpdf(theta_.data(), i);
        if (!std::isfinite(data_new[i]) || !std::isfinite(ranef_new[i])) {
          finite = false;
          break;
        }
        old_sum += data_ll_[i] + ranef_ll_[i];
        new_sum += data_new[i] + ranef_new[i];
      }
      delta += new_sum - old_sum;
    }
    const bool accept = finite && std::log(rng_.uniform()) < delta;
    if (accept) {
      data_ll_.swap(data_new);
      ranef_ll_.swap(ranef_new);
      prior_[j] = prior_new;
      jac_[j] = jac_new;
    } else {
      for (int c = 0; c < b.dim; ++c) {
        v_[off + c] = v_old[c];
        theta_[off + c] = x_old[c];
      }
    }
    return accept;
  }

  bool update_subject(int j, int i, int c) {
    const Block& b = space_.block(j);
    const int k = space_.subject_slot(j, i, c);
    const double v_old = v_[k];
    const double x_old = theta_[k];
    const double jac_old = log_jacobian(b.support, v_old, x_old);

    v_[k] += scales_[j][c] * rng_.normal();
    theta_[k] = to_constrained(b.support, v_[k]);
    const double jac_new = log_jacobian(b.support, v_[k], theta_[k]);

    const double data_new = model_.data_loglik(theta_.data(), i);
    const double ranef_new = model_.ranef_logpdf(theta_.data(), i);
    const bool finite = std::isfinite(data_new) && std::isfinite(ranef_new);
    const double delta =
        data_new + ranef_new - data_ll_[i] - ranef_ll_[i] + jac_new - jac_old;
    const bool accept = finite && std::log(rng_.uniform()) < delta;
    if (accept) {
      data_ll_[i] = data_new;
      ranef_ll_[i] = ranef_new;
      jac_[j] += jac_new - jac_old;
    } else {
      v_[k] = v_old;
      theta_[k] = x_old;
    }
    return accept;
  }

  const SubjectModel& model_;
  const ParameterSpace& space_;
  const PriorSpec& priors_;
  const McmcSettings& cfg_;
  Rng rng_;
  int n_;
  std::vector<double> v_, theta_;
  std::vector<double> data_ll_, ranef_ll_;
  std::vector<double> prior_, jac_;
  std::vector<std::vector<double>> scales_;
  std::vector<int> updates_;
  double adapt_sweeps_ = 0.0;
};

}  // namespace

PosteriorDraws run_mcmc(const SubjectModel& model, const PriorSpec& priors,
                        const McmcSettings& settings) {
  if (settings.chains < 1) throw ConfigError("mcmc needs at least one chain");
  if (settings.iters < 1) throw ConfigError("mcmc needs at least one kept iteration");
  const ParameterSpace& space = model.space();

  std::vector<ChainResult> results(settings.chains);
  std::vector<std::string> errors(settings.chains);
  parallel_for(settings.chains, std::min(settings.threads, settings.chains), [&](int c) {
    try {
      ChainRunner runner(model, priors, settings,
                         derive_seed(settings.seed, {0xC0FFEEULL, static_cast<std::uint64_t>(c)}));
      results[c] = runner.run();
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw NumericalError(e);
  }

  PosteriorDraws out;
  out.chains = settings.chains;
  out.iters = settings.iters;
  out.dim = space.dim();
  out.draws.reserve(static_cast<size_t>(out.n_kept()) * out.dim);
  for (auto& r : results) {
    out.draws.insert(out.draws.end(), r.draws.begin(), r.draws.end());
    out.loglik.insert(out.loglik.end(), r.loglik.begin(), r.loglik.end());
    out.logprior.insert(out.logprior.end(), r.logprior.begin(), r.logprior.end());
    out.logranef.insert(out.logranef.end(), r.logranef.begin(), r.logranef.end());
    out.osloglik.insert(out.osloglik.end(), r.osloglik.begin(), r.osloglik.end());
  }

  for (int j = 0; j < space.block_count(); ++j) {
    std::int64_t acc = 0, prop = 0;
    for (const auto& r : results) {
      acc += r.accepted[j];
      prop += r.proposed[j];
    }
    out.acceptance[space.block(j).name] = prop > 0 ? static_cast<double>(acc) / prop : 0.0;
  }

  for (int j = 0; j < space.block_count(); ++j) {
    const Block& b = space.block(j);
    if (b.role == Role::Global) {
      for (int c = 0; c < b.dim; ++c) {
        out.global_index.push_back(space.offset(j) + c);
        out.global_support.push_back(b.support);
      }
    }
  }

  out.names = space.flat_names(model.subject_ids());

  if (settings.chains >= 2 && settings.iters >= 4) {
    for (int g : out.global_index) {
      std::vector<std::vector<double>> per_chain(settings.chains);
      for (int c = 0; c < settings.chains; ++c) {
        per_chain[c].resize(settings.iters);
        for (int t = 0; t < settings.iters; ++t) per_chain[c][t] = out.at(c, t, g);
      }
      const double r = gelman_rubin_rhat(per_chain);
      out.rhat[out.names[g]] = r;
      if (!(r < 1.1)) out.converged = false;
    }
  }
  return out;
}

}  // namespace osm
