#include "osm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "osm/bma.hpp"
#include "osm/common.hpp"
#include "osm/stats.hpp"

namespace osm {

std::vector<double> visit_schedule(double horizon) {
  std::vector<double> v;
  for (double t = 0.0; t <= 24.0 + 1e-9 && t <= horizon + 1e-9; t += 2.0) v.push_back(t);
  for (double t = 27.0; t <= horizon + 1e-9; t += 3.0) v.push_back(t);
  return v;
}

namespace {

constexpr std::uint64_t kTagSubject = 0xD7;
constexpr std::uint64_t kTagGenerate = 0xA1;
constexpr std::uint64_t kTagFit = 0xA2;
constexpr std::uint64_t kTagPpd = 0xA3;

double clamp_unit(double u) { return std::min(std::max(u, 1e-12), 1.0 - 1e-12); }

}  // namespace

GeneratedTrial generate_trial(const GeneratorConfig& cfg) {
  if (cfg.scenario < 1 || cfg.scenario > 4) throw ConfigError("scenario must be 1..4");
  if (cfg.n_subjects < 2) throw ConfigError("need at least 2 subjects");
  if (!(cfg.tl_mix >= 0.0 && cfg.tl_mix <= 1.0)) throw ConfigError("tl_mix must be in [0,1]");

  const std::vector<double> visits = visit_schedule(cfg.visit_horizon);
  const double eta = cfg.scenario == 4 ? cfg.eta_scenario4 : cfg.eta_scenario2;
  const double rho_c = std::sqrt(1.0 - cfg.tl_corr * cfg.tl_corr);

  GeneratedTrial out;
  out.death_months.resize(cfg.n_subjects);
  std::vector<SubjectRecord> subjects(cfg.n_subjects);
  for (int i = 0; i < cfg.n_subjects; ++i) {
    Rng rng(derive_seed(cfg.seed, {kTagSubject, static_cast<std::uint64_t>(i)}));
    SubjectRecord s;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "S%04d", i + 1);
    s.id = buf;
    s.arm = i % 2;
    s.randomization_date = 0.0;

    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double b1 = cfg.tl_sd_intercept * z1;
    const double b2 = cfg.tl_sd_slope * (cfg.tl_corr * z1 + rho_c * z2);

    const double b_nl = cfg.nl_rate * std::exp(cfg.nl_trt * s.arm);
    const double b_os = cfg.os_rate * std::exp(cfg.os_trt * s.arm);
    const double u_nl = rng.uniform();  // survival quantile of the lesion time
    const double t_nl = std::pow(-std::log(u_nl) / b_nl, 1.0 / cfg.nl_shape);

    // survival quantile near 1 means early death
    double t_os;
    switch (cfg.scenario) {
      case 1: {
        const double v = rng.uniform();
        t_os = std::pow(-std::log(v) / b_os, 1.0 / cfg.os_shape);
        break;
      }
      case 2: {
        const double w = rng.uniform();
        const double lv = clayton::invert_cond_given_event(eta, std::log(u_nl), std::log(w));
        t_os = std::pow(-lv / b_os, 1.0 / cfg.os_shape);
        break;
      }
      case 3: {
        const double u = rng.uniform();
        const double v = clamp_unit(cfg.tl_mix * normal_cdf(z1) + (1.0 - cfg.tl_mix) * u);
        t_os = std::pow(-std::log(v) / b_os, 1.0 / cfg.os_shape);
        break;
      }
      default: {
        const double u = rng.uniform();
        const double w = clamp_unit(cfg.tl_mix * normal_cdf(z1) + (1.0 - cfg.tl_mix) * u);
        const double lv = clayton::invert_cond_given_event(eta, std::log(u_nl), std::log(w));
        t_os = std::pow(-lv / b_os, 1.0 / cfg.os_shape);
        break;
      }
    }
    out.death_months[i] = t_os;
    s.os = {t_os, 1};

    const double admin = std::min(t_os, cfg.visit_horizon);
    if (t_nl <= admin) {
      s.nl = {t_nl, 1};
    } else {
      s.nl = {admin, 0};
    }
    s.nt = {admin, 0};  // non-target progression not generated
    s.ttp = s.nl;
    s.progression = s.nl;

    for (double t : visits) {
      if (t > admin + 1e-9) break;
      const double mean = cfg.tl_intercept + cfg.tl_trt * s.arm + b1 + (cfg.tl_slope + b2) * t;
      s.tl_times.push_back(t);
      s.tl_values.push_back(mean + cfg.tl_sd_noise * rng.normal());
    }
    subjects[i] = std::move(s);
  }

  out.last_death_months = *std::max_element(out.death_months.begin(), out.death_months.end());
  out.last_death_date = months_to_days(out.last_death_months);
  out.full = make_snapshot(std::move(subjects), out.last_death_date);
  return out;
}

// ---------------------------------------------------------------------------

PpdMatrix fit_and_ppd(const std::string& method, const TrialSnapshot& snap,
                      const PriorSpec& priors, McmcSettings mcmc, std::uint64_t ppd_seed,
                      bool* converged) {
  bool conv = true;
  PpdMatrix out;
  if (method == "marginal") {
    MarginalOsModel m(snap);
    const PosteriorDraws d = run_mcmc(m, priors, mcmc);
    conv = d.converged;
    out = ppd_marginal(m, d, snap, ppd_seed, mcmc.threads);
  } else if (method == "spjm") {
    SpjmModel m(snap);
    const PosteriorDraws d = run_mcmc(m, priors, mcmc);
    conv = d.converged;
    out = ppd_spjm(m, d, snap, ppd_seed, mcmc.threads);
  } else if (method == "ttp") {
    ClaytonPairModel m(snap, PairKind::TTP);
    const PosteriorDraws d = run_mcmc(m, priors, mcmc);
    conv = d.converged;
    out = ppd_clayton(m, d, snap, ppd_seed, mcmc.threads);
  } else if (method == "multistate") {
    MultistateModel m(snap);
    const PosteriorDraws d = run_mcmc(m, priors, mcmc);
    conv = d.converged;
    out = ppd_multistate(m, d, snap, ppd_seed, mcmc.threads);
  } else if (method == "bave") {
    TlOsModel mt(snap);
    ClaytonPairModel mn(snap, PairKind::NL);
    MarginalOsModel mo(snap);
    McmcSettings st = mcmc, sn = mcmc, so = mcmc;
    st.seed = derive_seed(mcmc.seed, {1});
    sn.seed = derive_seed(mcmc.seed, {2});
    so.seed = derive_seed(mcmc.seed, {3});
    const PosteriorDraws dt = run_mcmc(mt, priors, st);
    const PosteriorDraws dn = run_mcmc(mn, priors, sn);
    const PosteriorDraws dmo = run_mcmc(mo, priors, so);
    conv = dt.converged && dn.converged && dmo.converged;
    const std::vector<BmaStream> streams = {make_stream("tl_os", dt), make_stream("nl_os", dn),
                                            make_stream("marginal", dmo)};
    const BmaWeights weights = compute_weights(streams);
    std::vector<PpdMatrix> comps;
    comps.push_back(ppd_tl_os(mt, dt, snap, derive_seed(ppd_seed, {1}), mcmc.threads));
    comps.push_back(ppd_clayton(mn, dn, snap, derive_seed(ppd_seed, {2}), mcmc.threads));
    comps.push_back(ppd_marginal(mo, dmo, snap, derive_seed(ppd_seed, {3}), mcmc.threads));
    out = bma_ppd(weights, comps, derive_seed(ppd_seed, {4}));
  } else {
    throw ConfigError("unknown method: " + method);
  }
  if (converged) *converged = conv;
  return out;
}

std::vector<EvalCell> aggregate_cells(const std::vector<ReplicateResult>& rows) {
  struct Acc {
    int scenario = 0;
    int k = 0;
    std::string method;
    std::vector<double> err, width;
    int cover = 0, fail = 0;
  };
  std::vector<Acc> accs;
  for (const auto& r : rows) {
    Acc* a = nullptr;
    for (auto& cand : accs) {
      if (cand.k == r.k && cand.method == r.method) {
        a = &cand;
        break;
      }
    }
    if (a == nullptr) {
      accs.push_back(Acc{});
      a = &accs.back();
      a->scenario = r.scenario;
      a->k = r.k;
      a->method = r.method;
    }
    if (r.failed) {
      a->fail += 1;
      continue;
    }
    a->err.push_back(r.pred_months - r.truth_months);
    a->width.push_back(r.hi_months - r.lo_months);
    if (r.lo_months <= r.truth_months && r.truth_months <= r.hi_months) a->cover += 1;
  }
  std::vector<EvalCell> cells;
  for (const auto& a : accs) {
    EvalCell c;
    c.scenario = a.scenario;
    c.k = a.k;
    c.method = a.method;
    c.n_fail = a.fail;
    c.n_ok = static_cast<int>(a.err.size());
    if (c.n_ok > 0) {
      double sum = 0.0, sq = 0.0, wsum = 0.0;
      for (double e : a.err) {
        sum += e;
        sq += e * e;
      }
      for (double w : a.width) wsum += w;
      c.bias = sum / c.n_ok;
      c.rmse = std::sqrt(sq / c.n_ok);
      c.cr = static_cast<double>(a.cover) / c.n_ok;
      c.width = wsum / c.n_ok;
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

EvalReport run_study(const StudyConfig& cfg) {
  if (cfg.replicates < 1) throw ConfigError("replicates must be positive");
  if (cfg.snapshot_ks.empty()) throw ConfigError("no snapshot sizes given");
  if (cfg.methods.empty()) throw ConfigError("no methods given");
  for (int k : cfg.snapshot_ks) {
    if (k < 1 || k >= cfg.generator.n_subjects) {
      throw ConfigError("snapshot k must be in [1, n_subjects)");
    }
  }
  const int n_k = static_cast<int>(cfg.snapshot_ks.size());
  const int n_m = static_cast<int>(cfg.methods.size());
  const int per_rep = n_k * n_m;

  EvalReport report;
  report.rows.resize(static_cast<size_t>(cfg.replicates) * per_rep);
  parallel_for(cfg.replicates, cfg.threads, [&](int rep) {
    GeneratorConfig g = cfg.generator;
    g.seed = derive_seed(cfg.seed, {kTagGenerate, static_cast<std::uint64_t>(rep)});
    const GeneratedTrial trial = generate_trial(g);
    const int total = static_cast<int>(trial.full.subjects.size());
    const int n_target = cfg.target_n > 0 ? cfg.target_n : total;
    std::vector<double> sorted = trial.death_months;
    std::sort(sorted.begin(), sorted.end());
    const double truth = sorted[n_target - 1];

    for (int ki = 0; ki < n_k; ++ki) {
      const TrialSnapshot snap = snapshot_at_kth_death(trial.full, cfg.snapshot_ks[ki]);
      for (int mi = 0; mi < n_m; ++mi) {
        ReplicateResult r;
        r.scenario = g.scenario;
        r.replicate = rep;
        r.k = cfg.snapshot_ks[ki];
        r.method = cfg.methods[mi];
        r.truth_months = truth;
        try {
          if (n_target <= snap.deaths_observed) {
            throw ConfigError("milestone already reached at this snapshot");
          }
          McmcSettings ms = cfg.mcmc;
          ms.seed = derive_seed(cfg.seed, {kTagFit, static_cast<std::uint64_t>(rep),
                                           static_cast<std::uint64_t>(ki),
                                           static_cast<std::uint64_t>(mi)});
          const std::uint64_t pseed =
              derive_seed(cfg.seed, {kTagPpd, static_cast<std::uint64_t>(rep),
                                     static_cast<std::uint64_t>(ki),
                                     static_cast<std::uint64_t>(mi)});
          bool conv = true;
          const PpdMatrix ppd = fit_and_ppd(r.method, snap, cfg.priors, ms, pseed, &conv);
          const MilestoneForecast mf = milestone_nth_death(ppd, snap, n_target, 0.9);
          r.pred_months = days_to_months(mf.median_date);
          r.lo_months = days_to_months(mf.hpd_lo);
          r.hi_months = days_to_months(mf.hpd_hi);
          r.converged = conv;
        } catch (const std::exception&) {
          r.failed = true;
        }
        report.rows[static_cast<size_t>(rep) * per_rep + static_cast<size_t>(ki) * n_m + mi] =
            std::move(r);
      }
    }
  });
  report.cells = aggregate_cells(report.rows);
  return report;
}

void write_eval_report(const EvalReport& report, const std::string& summary_csv,
                       const std::string& rows_csv) {
  std::ofstream s(summary_csv);
  if (!s) throw DataError("cannot write " + summary_csv);
  s << "scenario,k,method,bias,rmse,cr,width,n_fail\n";
  for (const auto& c : report.cells) {
    s << c.scenario << ',' << c.k << ',' << c.method << ',' << fmt_double(c.bias) << ','
      << fmt_double(c.rmse) << ',' << fmt_double(c.cr) << ',' << fmt_double(c.width) << ','
      << c.n_fail << '\n';
  }
  std::ofstream r(rows_csv);
  if (!r) throw DataError("cannot write " + rows_csv);
  r << "scenario,replicate,k,method,truth_months,pred_months,lo90,hi90,failed,converged\n";
  for (const auto& x : report.rows) {
    r << x.scenario << ',' << x.replicate << ',' << x.k << ',' << x.method << ','
      << fmt_double(x.truth_months) << ',' << fmt_double(x.pred_months) << ','
      << fmt_double(x.lo_months) << ',' << fmt_double(x.hi_months) << ',' << (x.failed ? 1 : 0)
      << ',' << (x.converged ? 1 : 0) << '\n';
  }
}

}  // namespace osm
