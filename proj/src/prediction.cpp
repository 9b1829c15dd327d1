#include "osm/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "osm/common.hpp"
#include "osm/stats.hpp"

namespace osm {

namespace {

constexpr std::uint64_t kTagMarginal = 0x11;
constexpr std::uint64_t kTagTlOs = 0x12;
constexpr std::uint64_t kTagClayton = 0x13;
constexpr std::uint64_t kTagSpjm = 0x14;
constexpr std::uint64_t kTagMultistate = 0x15;
constexpr std::uint64_t kTagBma = 0x16;

// sampler(theta, subject, rng) -> months since randomization, > follow-up
template <typename Sampler>
PpdMatrix run_ppd(const PosteriorDraws& draws, const TrialSnapshot& snap, std::uint64_t seed,
                  int threads, std::uint64_t tag, const Sampler& sampler) {
  PpdMatrix m;
  for (int idx : snap.alive_indices()) {
    m.subject_index.push_back(idx);
    m.subject_ids.push_back(snap.subjects[idx].id);
  }
  m.n_draws = draws.n_kept();
  m.horizon = kPpdHorizonMonths;
  const int a = m.n_alive();
  m.times.assign(static_cast<size_t>(m.n_draws) * a, 0.0);
  m.capped.assign(static_cast<size_t>(m.n_draws) * a, 0);
  parallel_for(m.n_draws, threads, [&](int k) {
    const double* theta = draws.draw(k);
    for (int j = 0; j < a; ++j) {
      Rng rng(derive_seed(seed, {tag, static_cast<std::uint64_t>(k),
                                 static_cast<std::uint64_t>(j)}));
      double t = sampler(theta, m.subject_index[j], rng);
      std::uint8_t cap = 0;
      if (t > kPpdHorizonMonths) {
        t = kPpdHorizonMonths;
        cap = 1;
      }
      const double fu = snap.subjects[m.subject_index[j]].os.time;
      if (t <= fu) t = fu + 1e-9 * (1.0 + fu);  // strict exceedance under roundoff
      m.times[static_cast<size_t>(k) * a + j] = t;
      m.capped[static_cast<size_t>(k) * a + j] = cap;
    }
  });
  return m;
}

}  // namespace

PpdMatrix ppd_marginal(const MarginalOsModel& model, const PosteriorDraws& draws,
                       const TrialSnapshot& snap, std::uint64_t seed, int threads) {
  return run_ppd(draws, snap, seed, threads, kTagMarginal,
                 [&](const double* theta, int i, Rng& rng) {
                   const WeibullHazard h = model.subject_hazard(theta, i);
                   return weibull_inverse_truncated(h, rng.uniform(), model.follow_up(i));
                 });
}

PpdMatrix ppd_spjm(const SpjmModel& model, const PosteriorDraws& draws, const TrialSnapshot& snap,
                   std::uint64_t seed, int threads) {
  return run_ppd(draws, snap, seed, threads, kTagSpjm, [&](const double* theta, int i, Rng& rng) {
    const WeibullHazard h = model.subject_os_hazard(theta, i);
    return weibull_inverse_truncated(h, rng.uniform(), model.follow_up(i));
  });
}

PpdMatrix ppd_tl_os(const TlOsModel& model, const PosteriorDraws& draws, const TrialSnapshot& snap,
                    std::uint64_t seed, int threads) {
  return run_ppd(draws, snap, seed, threads, kTagTlOs, [&](const double* theta, int i, Rng& rng) {
    const TlOsModel::EventLaw law = model.subject_event_law(theta, i);
    const double c = model.follow_up(i);
    const double target =
        weibull_exp_linear_chaz(law.alpha, law.b, law.m, c) + rng.exponential();
    const double h_max = weibull_exp_linear_chaz(law.alpha, law.b, law.m, kPpdHorizonMonths);
    if (!(target < h_max)) return kPpdHorizonMonths * 1.0000001;  // force cap flag
    return weibull_exp_linear_invert(law.alpha, law.b, law.m, target, c, kPpdHorizonMonths);
  });
}

PpdMatrix ppd_clayton(const ClaytonPairModel& model, const PosteriorDraws& draws,
                      const TrialSnapshot& snap, std::uint64_t seed, int threads) {
  return run_ppd(draws, snap, seed, threads, kTagClayton,
                 [&](const double* theta, int i, Rng& rng) {
                   WeibullHazard ha{}, hos{};
                   if (!model.subject_margins(theta, i, &ha, &hos)) {
                     throw NumericalError("clayton ppd: non-positive frailty scale in draw");
                   }
                   const double eta = model.eta(theta);
                   const double c = model.os_time(i);
                   const double lv_c = -weibull_cumhaz(hos, c);  // log S_OS(c)
                   const double u = rng.uniform();
                   double lv;
                   if (model.comp_event(i) == 1) {
                     const double lu = -weibull_cumhaz(ha, model.comp_time(i));
                     const double lk = clayton::log_cond_given_event(eta, lu, lv_c);
                     lv = clayton::invert_cond_given_event(eta, lu, std::log(u) + lk);
                   } else {
                     const double la = -weibull_cumhaz(ha, model.comp_time(i));
                     const double lk = clayton::log_cond_given_censored(eta, la, lv_c);
                     lv = clayton::invert_cond_given_censored(eta, la, std::log(u) + lk);
                   }
                   // -lv = H_OS(t) = b t^alpha
                   return std::pow(-lv / hos.b, 1.0 / hos.alpha);
                 });
}

PpdMatrix ppd_multistate(const MultistateModel& model, const PosteriorDraws& draws,
                         const TrialSnapshot& snap, std::uint64_t seed, int threads) {
  return run_ppd(draws, snap, seed, threads, kTagMultistate,
                 [&](const double* theta, int i, Rng& rng) {
                   const MultistateModel::Rates r = model.subject_rates(theta, i);
                   const double c = model.follow_up(i);
                   if (model.state_at_followup(i) == 1) {
                     // clock reset at progression; condition on surviving so far
                     const double s = model.prog_time(i);
                     const double d0 = std::max(c - s, 0.0);
                     const WeibullHazard h12{r.alpha, r.b12};
                     return s + weibull_inverse_truncated(h12, rng.uniform(), d0);
                   }
                   const WeibullHazard exit_h{r.alpha, r.b01 + r.b02};
                   const double exit = weibull_inverse_truncated(exit_h, rng.uniform(), c);
                   const bool to_progression = rng.uniform() < r.b01 / (r.b01 + r.b02);
                   if (!to_progression) return exit;
                   const WeibullHazard h12{r.alpha, r.b12};
                   return exit + weibull_inverse_truncated(h12, rng.uniform(), 0.0);
                 });
}

PpdMatrix bma_ppd(const BmaWeights& weights, const std::vector<PpdMatrix>& components,
                  std::uint64_t seed) {
  if (components.empty()) throw ConfigError("bma_ppd: no component matrices");
  if (static_cast<int>(components.size()) != static_cast<int>(weights.models.size())) {
    throw ConfigError("bma_ppd: weights/components mismatch");
  }
  const PpdMatrix& first = components.front();
  for (const auto& c : components) {
    if (c.n_draws != weights.n_iter || c.subject_ids != first.subject_ids) {
      throw DataError("bma_ppd: components must share draws and subjects");
    }
  }
  PpdMatrix out = first;
  const int a = out.n_alive();
  const int q_count = static_cast<int>(components.size());
  for (int k = 0; k < out.n_draws; ++k) {
    Rng rng(derive_seed(seed, {kTagBma, static_cast<std::uint64_t>(k)}));
    const double u = rng.uniform();
    double acc = 0.0;
    int pick = q_count - 1;
    for (int q = 0; q < q_count; ++q) {
      acc += weights.at(k, q);
      if (u < acc) {
        pick = q;
        break;
      }
    }
    const PpdMatrix& src = components[pick];
    std::copy_n(src.times.begin() + static_cast<size_t>(k) * a, a,
                out.times.begin() + static_cast<size_t>(k) * a);
    std::copy_n(src.capped.begin() + static_cast<size_t>(k) * a, a,
                out.capped.begin() + static_cast<size_t>(k) * a);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> observed_death_dates(const TrialSnapshot& snap) {
  std::vector<double> dates;
  for (const auto& s : snap.subjects) {
    if (s.os.indicator == 1) dates.push_back(s.randomization_date + months_to_days(s.os.time));
  }
  return dates;
}

}  // namespace

MilestoneForecast milestone_nth_death(const PpdMatrix& ppd, const TrialSnapshot& snap, int n,
                                      double hpd_mass) {
  const int total = static_cast<int>(snap.subjects.size());
  if (n <= snap.deaths_observed) {
    throw ConfigError("milestone target n must exceed deaths already observed");
  }
  if (n > total) throw ConfigError("milestone target n exceeds subject count");
  const std::vector<double> observed = observed_death_dates(snap);
  const int a = ppd.n_alive();
  if (snap.deaths_observed + a < n) {
    throw DataError("milestone target n unreachable: insufficient subjects at risk");
  }

  MilestoneForecast out;
  out.target_n = n;
  out.draw_dates.resize(ppd.n_draws);
  std::vector<double> pool;
  for (int k = 0; k < ppd.n_draws; ++k) {
    pool = observed;
    for (int j = 0; j < a; ++j) {
      const auto& s = snap.subjects[ppd.subject_index[j]];
      pool.push_back(s.randomization_date + months_to_days(ppd.at(k, j)));
    }
    std::nth_element(pool.begin(), pool.begin() + (n - 1), pool.end());
    out.draw_dates[k] = pool[n - 1];
  }
  out.median_date = median_of(out.draw_dates);
  const HpdInterval h = hpd_interval(out.draw_dates, hpd_mass);
  out.hpd_lo = h.lo;
  out.hpd_hi = h.hi;
  out.median_months_after_cutoff = days_to_months(out.median_date - snap.cutoff_date);
  for (std::uint8_t c : ppd.capped) out.any_capped |= c != 0;
  return out;
}

DeathCountSummary death_count_at(const PpdMatrix& ppd, const TrialSnapshot& snap,
                                 double date_days) {
  if (date_days < snap.cutoff_date - 1e-9) {
    throw ConfigError("death count query date precedes snapshot cutoff");
  }
  DeathCountSummary out;
  out.query_date = date_days;
  int base = 0;
  for (double d : observed_death_dates(snap)) base += d <= date_days ? 1 : 0;
  const int a = ppd.n_alive();
  out.draws.resize(ppd.n_draws);
  std::vector<double> as_double(ppd.n_draws);
  for (int k = 0; k < ppd.n_draws; ++k) {
    int cnt = base;
    for (int j = 0; j < a; ++j) {
      const auto& s = snap.subjects[ppd.subject_index[j]];
      cnt += s.randomization_date + months_to_days(ppd.at(k, j)) <= date_days ? 1 : 0;
    }
    out.draws[k] = cnt;
    as_double[k] = cnt;
    out.mean += cnt;
  }
  out.mean /= ppd.n_draws;
  out.median = median_of(as_double);
  out.q05 = quantile_of(as_double, 0.05);
  out.q95 = quantile_of(as_double, 0.95);
  return out;
}

double logrank_z(const std::vector<double>& times, const std::vector<int>& events,
                 const std::vector<int>& arms) {
  const size_t n = times.size();
  if (events.size() != n || arms.size() != n) throw DataError("logrank: length mismatch");
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return times[a] < times[b]; });

  double n_all = static_cast<double>(n);
  double n1 = 0.0;
  for (int a : arms) n1 += a == 1 ? 1.0 : 0.0;
  double obs = 0.0, exp_d = 0.0, var = 0.0;
  size_t i = 0;
  while (i < n) {
    const double t = times[order[i]];
    double d = 0.0, d1 = 0.0, removed = 0.0, removed1 = 0.0;
    while (i < n && times[order[i]] == t) {
      const size_t idx = order[i];
      if (events[idx] == 1) {
        d += 1.0;
        if (arms[idx] == 1) d1 += 1.0;
      }
      removed += 1.0;
      if (arms[idx] == 1) removed1 += 1.0;
      ++i;
    }
    if (d > 0.0 && n_all > 1.0) {
      obs += d1;
      exp_d += d * n1 / n_all;
      var += d * (n1 / n_all) * (1.0 - n1 / n_all) * (n_all - d) / (n_all - 1.0);
    }
    n_all -= removed;
    n1 -= removed1;
  }
  if (var <= 0.0) return 0.0;
  return (obs - exp_d) / std::sqrt(var);
}

SuccessProbability probability_of_success(const PpdMatrix& ppd, const TrialSnapshot& snap,
                                          int target_n, double alpha, bool one_sided) {
  if (target_n <= snap.deaths_observed) {
    throw ConfigError("success analysis target n must exceed observed deaths");
  }
  if (target_n > static_cast<int>(snap.subjects.size())) {
    throw ConfigError("success analysis target n exceeds subject count");
  }
  const int total = static_cast<int>(snap.subjects.size());
  const int a = ppd.n_alive();

  SuccessProbability out;
  out.alpha = alpha;
  out.one_sided = one_sided;
  out.n_draws = ppd.n_draws;

  std::vector<double> death_date(total);
  std::vector<double> times(total);
  std::vector<int> events(total);
  std::vector<int> arms(total);
  std::vector<double> pool(total);
  for (int k = 0; k < ppd.n_draws; ++k) {
    for (int i = 0; i < total; ++i) {
      const auto& s = snap.subjects[i];
      arms[i] = s.arm;
      death_date[i] = s.os.indicator == 1
                          ? s.randomization_date + months_to_days(s.os.time)
                          : std::numeric_limits<double>::quiet_NaN();
    }
    for (int j = 0; j < a; ++j) {
      const int i = ppd.subject_index[j];
      death_date[i] = snap.subjects[i].randomization_date + months_to_days(ppd.at(k, j));
    }
    pool = death_date;
    std::nth_element(pool.begin(), pool.begin() + (target_n - 1), pool.end());
    const double analysis_date = pool[target_n - 1];
    for (int i = 0; i < total; ++i) {
      const auto& s = snap.subjects[i];
      if (death_date[i] <= analysis_date) {
        times[i] = days_to_months(death_date[i] - s.randomization_date);
        events[i] = 1;
      } else {
        times[i] = days_to_months(analysis_date - s.randomization_date);
        events[i] = 0;
      }
    }
    const double z = logrank_z(times, events, arms);
    bool success;
    if (one_sided) {
      success = normal_cdf(z) < alpha;
    } else {
      const double p = 2.0 * (1.0 - normal_cdf(std::fabs(z)));
      success = p < alpha && z < 0.0;
    }
    out.significant += success ? 1 : 0;
  }
  out.probability = static_cast<double>(out.significant) / ppd.n_draws;
  return out;
}

PredictedKm predicted_km(const PpdMatrix& ppd, const TrialSnapshot& snap, double grid_step,
                         double tau) {
  const int total = static_cast<int>(snap.subjects.size());
  const int a = ppd.n_alive();
  bool has[2] = {false, false};
  for (const auto& s : snap.subjects) has[s.arm] = true;
  if (!has[0] || !has[1]) throw DataError("predicted_km requires subjects in both arms");

  PredictedKm out;
  std::vector<std::vector<double>> arm_times(2);
  std::vector<KmCurve> curves(2);
  double max_time = 0.0;
  double min_arm_max = std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> eval[2];  // [draw][grid]
  std::vector<double> rmst;
  bool extrap = false;

  // first pass: completed event times per draw, track support
  std::vector<double> completed(total);
  for (int k = 0; k < ppd.n_draws; ++k) {
    for (int i = 0; i < total; ++i) completed[i] = snap.subjects[i].os.time;
    for (int j = 0; j < a; ++j) completed[ppd.subject_index[j]] = ppd.at(k, j);
    double arm_max[2] = {0.0, 0.0};
    for (int i = 0; i < total; ++i) {
      arm_max[snap.subjects[i].arm] = std::max(arm_max[snap.subjects[i].arm], completed[i]);
      max_time = std::max(max_time, completed[i]);
    }
    min_arm_max = std::min(min_arm_max, std::min(arm_max[0], arm_max[1]));
  }
  const double tau_eff = tau > 0.0 ? tau : min_arm_max;
  out.tau = tau_eff;

  for (double g = 0.0; g <= max_time + grid_step; g += grid_step) out.grid.push_back(g);
  for (int arm = 0; arm < 2; ++arm) eval[arm].assign(ppd.n_draws, {});

  std::vector<int> ones;
  for (int k = 0; k < ppd.n_draws; ++k) {
    for (int i = 0; i < total; ++i) completed[i] = snap.subjects[i].os.time;
    for (int j = 0; j < a; ++j) completed[ppd.subject_index[j]] = ppd.at(k, j);
    for (int arm = 0; arm < 2; ++arm) arm_times[arm].clear();
    for (int i = 0; i < total; ++i) arm_times[snap.subjects[i].arm].push_back(completed[i]);
    for (int arm = 0; arm < 2; ++arm) {
      ones.assign(arm_times[arm].size(), 1);
      curves[arm] = kaplan_meier(arm_times[arm], ones);
      eval[arm][k].resize(out.grid.size());
      for (size_t gi = 0; gi < out.grid.size(); ++gi) {
        eval[arm][k][gi] = km_eval(curves[arm], out.grid[gi]);
      }
    }
    const RmstDifference rd = rmst_difference(curves[1], curves[0], tau_eff);
    rmst.push_back(rd.value);
    extrap |= rd.extrapolated;
  }

  std::vector<double> col(ppd.n_draws);
  for (int arm = 0; arm < 2; ++arm) {
    out.med[arm].resize(out.grid.size());
    out.lo[arm].resize(out.grid.size());
    out.hi[arm].resize(out.grid.size());
    for (size_t gi = 0; gi < out.grid.size(); ++gi) {
      for (int k = 0; k < ppd.n_draws; ++k) col[k] = eval[arm][k][gi];
      out.med[arm][gi] = median_of(col);
      out.lo[arm][gi] = quantile_of(col, 0.05);
      out.hi[arm][gi] = quantile_of(col, 0.95);
    }
  }
  out.rmst_draws = rmst;
  out.rmst_median = median_of(rmst);
  if (rmst.size() >= 10) {
    const HpdInterval h = hpd_interval(rmst, 0.9);
    out.rmst_lo = h.lo;
    out.rmst_hi = h.hi;
  } else {
    out.rmst_lo = out.rmst_median;
    out.rmst_hi = out.rmst_median;
  }
  out.rmst_extrapolated = extrap;
  return out;
}

}  // namespace osm
