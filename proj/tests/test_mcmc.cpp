#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "osm/common.hpp"
#include "osm/mcmc.hpp"
#include "osm/stats.hpp"

using namespace osm;

namespace {

// Gaussian location model with a flat-ish coefficient prior; the posterior for
// mu is available in closed form, which pins the sampler's correctness.
class NormalMeanModel : public SubjectModel {
 public:
  explicit NormalMeanModel(std::vector<double> y) : y_(std::move(y)) {
    space_.add({"mu", 1, 1, Support::Real, Role::Global, Kind::Coefficient, 0.0});
  }
  const ParameterSpace& space() const override { return space_; }
  int subject_count() const override { return static_cast<int>(y_.size()); }
  double data_loglik(const double* th, int i) const override {
    return normal_logpdf(y_[i], th[0], 1.0);
  }
  double ranef_logpdf(const double*, int) const override { return 0.0; }

 private:
  ParameterSpace space_;
  std::vector<double> y_;
};

// Exponential observations with an Exponential(1) prior on the rate; the
// posterior is Gamma(n + 1, sum y + 1), exercising the positive support.
class ExpRateModel : public SubjectModel {
 public:
  explicit ExpRateModel(std::vector<double> y) : y_(std::move(y)) {
    space_.add({"rate", 1, 1, Support::Positive, Role::Global, Kind::RateScale, 1.0});
  }
  const ParameterSpace& space() const override { return space_; }
  int subject_count() const override { return static_cast<int>(y_.size()); }
  double data_loglik(const double* th, int i) const override {
    return std::log(th[0]) - th[0] * y_[i];
  }
  double ranef_logpdf(const double*, int) const override { return 0.0; }

 private:
  ParameterSpace space_;
  std::vector<double> y_;
};

// One observation per subject-level effect with a unit-normal population:
// posterior b_i | y_i is N(y_i / 2, 1/2), a direct check of the per-subject
// update path.
class RanefModel : public SubjectModel {
 public:
  explicit RanefModel(std::vector<double> y) : y_(std::move(y)) {
    space_.add({"b", static_cast<int>(y_.size()), 1, Support::Real, Role::PerSubject,
                Kind::RandomEffect, 0.0});
  }
  const ParameterSpace& space() const override { return space_; }
  int subject_count() const override { return static_cast<int>(y_.size()); }
  double data_loglik(const double* th, int i) const override {
    return normal_logpdf(y_[i], th[i], 1.0);
  }
  double ranef_logpdf(const double* th, int i) const override {
    return normal_logpdf(th[i], 0.0, 1.0);
  }

 private:
  ParameterSpace space_;
  std::vector<double> y_;
};

McmcSettings quick_settings(std::uint64_t seed) {
  McmcSettings s;
  s.chains = 2;
  s.adapt = 1500;
  s.burn_in = 500;
  s.iters = 3000;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("parameter space lays out blocks contiguously") {
  ParameterSpace sp;
  sp.add({"a", 2, 1, Support::Real, Role::Global, Kind::Coefficient, 0.5});
  sp.add({"s", 1, 1, Support::Positive, Role::Global, Kind::StdDev, 2.0});
  sp.add({"b", 6, 2, Support::Real, Role::PerSubject, Kind::RandomEffect, 0.0});
  CHECK(sp.dim() == 9);
  CHECK(sp.block_count() == 3);
  CHECK(sp.find("s") == 1);
  CHECK(sp.find("missing") == -1);
  CHECK(sp.offset(2) == 3);
  // subject-major layout: subject i occupies comps consecutive slots
  CHECK(sp.subject_slot(2, 0, 0) == 3);
  CHECK(sp.subject_slot(2, 0, 1) == 4);
  CHECK(sp.subject_slot(2, 2, 1) == 8);

  const auto names = sp.flat_names({"p1", "p2", "p3"});
  REQUIRE(names.size() == 9);
  CHECK(names[0] == "a[0]");
  CHECK(names[1] == "a[1]");
  CHECK(names[2] == "s");
  CHECK(names[3] == "b.0[p1]");
  CHECK(names[8] == "b.1[p3]");

  const auto init = initialize(sp);
  CHECK(init[0] == 0.5);
  CHECK(init[2] == 2.0);
  CHECK(init[5] == 0.0);
}

TEST_CASE("prior densities follow the documented families") {
  PriorSpec pr;
  Block coef{"beta", 2, 1, Support::Real, Role::Global, Kind::Coefficient, 0.0};
  const double xc[2] = {1.0, -2.0};
  CHECK(pr.log_density(coef, xc) ==
        doctest::Approx(normal_logpdf(1.0, 0.0, pr.coef_sd) +
                        normal_logpdf(-2.0, 0.0, pr.coef_sd)));

  Block shape{"alpha", 1, 1, Support::Positive, Role::Global, Kind::Shape, 1.0};
  const double xs[1] = {0.7};
  CHECK(pr.log_density(shape, xs) == doctest::Approx(-0.7));  // Exponential(1)

  Block sd{"sigma", 1, 1, Support::Positive, Role::Global, Kind::StdDev, 1.0};
  const double xd[1] = {3.0};
  CHECK(pr.log_density(sd, xd) ==
        doctest::Approx(std::log(2.0) + normal_logpdf(3.0, 0.0, pr.sd_scale)));

  Block corr{"rho", 1, 1, Support::Corr, Role::Global, Kind::Correlation, 0.0};
  const double xr[1] = {0.4};
  CHECK(pr.log_density(corr, xr) == doctest::Approx(-std::log(2.0)));

  // dependence parameters get a flatter exponential than shapes do
  Block dep{"eta", 1, 1, Support::Positive, Role::Global, Kind::Dependence, 1.0};
  const double xe[1] = {6.0};
  CHECK(pr.log_density(dep, xe) ==
        doctest::Approx(std::log(pr.dependence_rate) - pr.dependence_rate * 6.0));
  CHECK(pr.dependence_rate < pr.shape_rate);

  // overrides swap the scale by block name
  pr.scale_override["alpha"] = 4.0;
  CHECK(pr.log_density(shape, xs) == doctest::Approx(std::log(4.0) - 4.0 * 0.7));
}

TEST_CASE("sampler recovers a conjugate normal-mean posterior") {
  Rng rng(314);
  std::vector<double> y(50);
  double sum = 0.0;
  for (auto& v : y) {
    v = 2.0 + rng.normal();
    sum += v;
  }
  const double prior_prec = 1.0 / (100.0 * 100.0);
  const double post_mean = sum / (y.size() + prior_prec);
  const double post_sd = 1.0 / std::sqrt(y.size() + prior_prec);

  NormalMeanModel model(y);
  const PosteriorDraws draws = run_mcmc(model, PriorSpec{}, quick_settings(9));

  REQUIRE(draws.dim == 1);
  REQUIRE(draws.n_kept() == 6000);
  std::vector<double> mu;
  for (int k = 0; k < draws.n_kept(); ++k) mu.push_back(draws.draw(k)[0]);
  const double mc_mean = std::accumulate(mu.begin(), mu.end(), 0.0) / mu.size();
  double mc_var = 0.0;
  for (double v : mu) mc_var += (v - mc_mean) * (v - mc_mean);
  mc_var /= mu.size();

  CHECK(std::abs(mc_mean - post_mean) < 5.0 * post_sd / std::sqrt(200.0));
  CHECK(std::sqrt(mc_var) == doctest::Approx(post_sd).epsilon(0.15));
  CHECK(draws.converged);
  for (const auto& [name, r] : draws.rhat) CHECK(r < 1.1);
  for (const auto& [name, rate] : draws.acceptance) {
    CHECK(rate > 0.2);
    CHECK(rate < 0.75);
  }
  CHECK(draws.names == std::vector<std::string>{"mu"});
  REQUIRE(draws.global_index.size() == 1);
  CHECK(draws.global_index[0] == 0);
}

TEST_CASE("sampler recovers a conjugate gamma posterior on the positive scale") {
  Rng rng(1234);
  std::vector<double> y(60);
  double sum = 0.0;
  for (auto& v : y) {
    v = rng.exponential(0.5);
    sum += v;
  }
  // posterior Gamma(n + 1, sum + 1)
  const double post_mean = (y.size() + 1.0) / (sum + 1.0);
  const double post_sd = std::sqrt(y.size() + 1.0) / (sum + 1.0);

  ExpRateModel model(y);
  const PosteriorDraws draws = run_mcmc(model, PriorSpec{}, quick_settings(21));
  std::vector<double> rate;
  for (int k = 0; k < draws.n_kept(); ++k) {
    rate.push_back(draws.draw(k)[0]);
    CHECK(rate.back() > 0.0);
  }
  const double mc_mean = std::accumulate(rate.begin(), rate.end(), 0.0) / rate.size();
  CHECK(std::abs(mc_mean - post_mean) < 4.0 * post_sd / std::sqrt(100.0) + 0.02 * post_mean);
}

TEST_CASE("per-subject effects shrink toward the population mean") {
  const std::vector<double> y{3.0, -2.0, 1.0, 0.0, 4.0};
  RanefModel model(y);
  McmcSettings s = quick_settings(5);
  const PosteriorDraws draws = run_mcmc(model, PriorSpec{}, s);
  REQUIRE(draws.dim == 5);
  for (size_t i = 0; i < y.size(); ++i) {
    std::vector<double> bi;
    for (int k = 0; k < draws.n_kept(); ++k) bi.push_back(draws.draw(k)[i]);
    const double m = std::accumulate(bi.begin(), bi.end(), 0.0) / bi.size();
    // posterior is N(y_i / 2, 1/2)
    CHECK(std::abs(m - y[i] / 2.0) < 0.15);
  }
  // random-effect density shows up in the logranef stream, not the prior one
  for (int k = 0; k < draws.n_kept(); ++k) {
    CHECK(draws.stream_logprior(k) == 0.0);
    CHECK(std::isfinite(draws.stream_logranef(k)));
  }
}

TEST_CASE("chains are reproducible and independent of the thread count") {
  Rng rng(8);
  std::vector<double> y(30);
  for (auto& v : y) v = 1.0 + rng.normal();
  NormalMeanModel model(y);

  McmcSettings s = quick_settings(77);
  s.adapt = 400;
  s.iters = 600;
  const PosteriorDraws a = run_mcmc(model, PriorSpec{}, s);
  const PosteriorDraws b = run_mcmc(model, PriorSpec{}, s);
  s.threads = 3;
  const PosteriorDraws c = run_mcmc(model, PriorSpec{}, s);

  REQUIRE(a.draws.size() == b.draws.size());
  REQUIRE(a.draws.size() == c.draws.size());
  CHECK(a.draws == b.draws);
  CHECK(a.draws == c.draws);
  CHECK(a.loglik == c.loglik);

  s.seed = 78;
  const PosteriorDraws d = run_mcmc(model, PriorSpec{}, s);
  CHECK(a.draws != d.draws);
}

TEST_CASE("loglik stream equals the model evaluated at the stored draw") {
  Rng rng(3);
  std::vector<double> y(12);
  for (auto& v : y) v = rng.normal();
  NormalMeanModel model(y);
  McmcSettings s = quick_settings(4);
  s.adapt = 300;
  s.iters = 200;
  const PosteriorDraws draws = run_mcmc(model, PriorSpec{}, s);
  REQUIRE(draws.osloglik.size() == draws.loglik.size());
  for (int k = 0; k < draws.n_kept(); k += 37) {
    double ll = 0.0;
    for (int i = 0; i < model.subject_count(); ++i) ll += model.data_loglik(draws.draw(k), i);
    CHECK(draws.stream_loglik(k) == doctest::Approx(ll).epsilon(1e-12));
    // without an override the conditional stream is the full one
    CHECK(draws.stream_osloglik(k) == draws.stream_loglik(k));
  }
}

TEST_CASE("conditional stream records the override evaluated at the stored draw") {
  // override that strips a constant per subject, mimicking models that drop
  // non-survival factors from the conditional stream
  class ShiftedModel : public NormalMeanModel {
   public:
    using NormalMeanModel::NormalMeanModel;
    double os_loglik(const double* th, int i) const override {
      return data_loglik(th, i) - 0.25;
    }
  };
  Rng rng(5);
  std::vector<double> y(9);
  for (auto& v : y) v = rng.normal();
  ShiftedModel model(y);
  McmcSettings s = quick_settings(6);
  s.adapt = 300;
  s.iters = 150;
  const PosteriorDraws draws = run_mcmc(model, PriorSpec{}, s);
  for (int k = 0; k < draws.n_kept(); k += 23) {
    CHECK(draws.stream_osloglik(k) ==
          doctest::Approx(draws.stream_loglik(k) - 0.25 * model.subject_count()).epsilon(1e-12));
  }
}
