#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "osm/common.hpp"
#include "osm/prediction.hpp"
#include "osm/simulation.hpp"
#include "osm/trial_data.hpp"

using namespace osm;

namespace {

SubjectRecord subject(const std::string& id, int arm, double rand_date, double os_time,
                      int os_event) {
  SubjectRecord s;
  s.id = id;
  s.arm = arm;
  s.randomization_date = rand_date;
  s.nt = {os_time, 0};
  s.nl = {os_time, 0};
  s.ttp = {os_time, 0};
  s.progression = {os_time, 0};
  s.os = {os_time, os_event};
  return s;
}

// three deaths (A, B, C) and two survivors (D, E) with staggered entry
TrialSnapshot five_subject_snap() {
  std::vector<SubjectRecord> subs;
  subs.push_back(subject("A", 0, 0.0, 10.0, 1));
  subs.push_back(subject("B", 1, 100.0, 5.0, 1));
  subs.push_back(subject("C", 0, 50.0, 8.0, 1));
  subs.push_back(subject("D", 1, 0.0, 12.0, 0));
  subs.push_back(subject("E", 0, 200.0, 6.0, 0));
  return make_snapshot(subs, 400.0);
}

PpdMatrix synthetic_ppd(const TrialSnapshot& snap, int n_draws,
                        const std::function<double(int, int)>& time_of) {
  PpdMatrix p;
  for (int idx : snap.alive_indices()) {
    p.subject_index.push_back(idx);
    p.subject_ids.push_back(snap.subjects[idx].id);
  }
  p.n_draws = n_draws;
  p.times.resize(static_cast<size_t>(n_draws) * p.subject_ids.size());
  p.capped.assign(p.times.size(), 0);
  for (int k = 0; k < n_draws; ++k) {
    for (int j = 0; j < p.n_alive(); ++j) {
      p.times[static_cast<size_t>(k) * p.n_alive() + j] = time_of(k, j);
    }
  }
  return p;
}

}  // namespace

TEST_CASE("milestone forecast pools observed and predicted death dates") {
  const TrialSnapshot snap = five_subject_snap();
  REQUIRE(snap.deaths_observed == 3);
  // D predicted at 15+k months (entry day 0), E at 8+2k months (entry day 200)
  const PpdMatrix ppd =
      synthetic_ppd(snap, 10, [](int k, int j) { return j == 0 ? 15.0 + k : 8.0 + 2.0 * k; });
  REQUIRE(ppd.n_alive() == 2);
  REQUIRE(ppd.subject_ids[0] == "D");

  const MilestoneForecast f4 = milestone_nth_death(ppd, snap, 4);
  CHECK(f4.target_n == 4);
  REQUIRE(f4.draw_dates.size() == 10);
  // per draw the 4th death is the earlier of the two predicted dates
  const double dpm = 365.25 / 12.0;
  for (int k = 0; k < 10; ++k) {
    const double d_date = (15.0 + k) * dpm;
    const double e_date = 200.0 + (8.0 + 2.0 * k) * dpm;
    CHECK(f4.draw_dates[k] == doctest::Approx(std::min(d_date, e_date)).epsilon(1e-12));
  }
  CHECK(f4.median_date == doctest::Approx(593.53125).epsilon(1e-12));
  CHECK(f4.hpd_lo == doctest::Approx(487.0).epsilon(1e-12));
  CHECK(f4.hpd_hi == doctest::Approx(730.5).epsilon(1e-12));
  CHECK(f4.median_months_after_cutoff ==
        doctest::Approx((593.53125 - 400.0) / dpm).epsilon(1e-12));
  CHECK(!f4.any_capped);

  // the 5th death is the later one; medians are monotone in the target
  const MilestoneForecast f5 = milestone_nth_death(ppd, snap, 5);
  CHECK(f5.median_date == doctest::Approx(717.4375).epsilon(1e-12));
  CHECK(f5.median_date >= f4.median_date);
  for (int k = 0; k < 10; ++k) CHECK(f5.draw_dates[k] >= f4.draw_dates[k]);

  PpdMatrix capped = ppd;
  capped.capped[3] = 1;
  CHECK(milestone_nth_death(capped, snap, 4).any_capped);
}

TEST_CASE("milestone forecast validates the target index") {
  const TrialSnapshot snap = five_subject_snap();
  const PpdMatrix ppd = synthetic_ppd(snap, 10, [](int, int) { return 50.0; });
  CHECK_THROWS_AS(milestone_nth_death(ppd, snap, 3), ConfigError);   // already reached
  CHECK_THROWS_AS(milestone_nth_death(ppd, snap, 6), ConfigError);   // beyond enrollment
  CHECK_NOTHROW(milestone_nth_death(ppd, snap, 4));

  // a matrix missing one survivor cannot reach the final death
  PpdMatrix partial = ppd;
  partial.subject_ids.pop_back();
  partial.subject_index.pop_back();
  partial.times.assign(10, 50.0);
  CHECK_THROWS_AS(milestone_nth_death(partial, snap, 5), DataError);
}

TEST_CASE("milestone forecast ignores subject ordering") {
  const TrialSnapshot snap = five_subject_snap();
  const PpdMatrix ppd =
      synthetic_ppd(snap, 10, [](int k, int j) { return j == 0 ? 15.0 + k : 8.0 + 2.0 * k; });
  PpdMatrix swapped = ppd;
  std::swap(swapped.subject_ids[0], swapped.subject_ids[1]);
  std::swap(swapped.subject_index[0], swapped.subject_index[1]);
  for (int k = 0; k < 10; ++k) {
    std::swap(swapped.times[2 * k], swapped.times[2 * k + 1]);
  }
  const MilestoneForecast a = milestone_nth_death(ppd, snap, 4);
  const MilestoneForecast b = milestone_nth_death(swapped, snap, 4);
  CHECK(a.median_date == b.median_date);
  CHECK(a.draw_dates == b.draw_dates);
}

TEST_CASE("death count distribution at a query date") {
  const TrialSnapshot snap = five_subject_snap();
  const PpdMatrix ppd =
      synthetic_ppd(snap, 10, [](int k, int j) { return j == 0 ? 15.0 + k : 8.0 + 2.0 * k; });

  // at the cutoff nothing new has happened
  const DeathCountSummary at_cutoff = death_count_at(ppd, snap, 400.0);
  CHECK(at_cutoff.mean == doctest::Approx(3.0));
  CHECK(at_cutoff.median == doctest::Approx(3.0));
  CHECK(at_cutoff.q05 == doctest::Approx(3.0));
  CHECK(at_cutoff.q95 == doctest::Approx(3.0));

  // at day 500: draws 0 and 1 complete one or both predicted deaths
  const DeathCountSummary mid = death_count_at(ppd, snap, 500.0);
  CHECK(mid.draws[0] == 5);
  CHECK(mid.draws[1] == 4);
  for (int k = 2; k < 10; ++k) CHECK(mid.draws[k] == 3);
  CHECK(mid.mean == doctest::Approx(3.3));
  CHECK(mid.median == doctest::Approx(3.0));
  CHECK(mid.q05 == doctest::Approx(3.0));
  CHECK(mid.q95 == doctest::Approx(4.55));

  // far in the future everyone has died, and counts grow monotonically
  const DeathCountSummary far = death_count_at(ppd, snap, 1.0e6);
  CHECK(far.mean == doctest::Approx(5.0));
  const DeathCountSummary later = death_count_at(ppd, snap, 600.0);
  for (int k = 0; k < 10; ++k) CHECK(later.draws[k] >= mid.draws[k]);

  CHECK_THROWS_AS(death_count_at(ppd, snap, 399.0), ConfigError);
}

TEST_CASE("log-rank statistic matches hand-computed tables") {
  // singles: deaths alternate between arms
  const double z = logrank_z({1, 2, 3, 4}, {1, 1, 1, 1}, {1, 0, 1, 0});
  // O1 = 2, E1 = 1/2 + 1/3 + 1/2, V = 1/4 + 2/9 + 1/4
  const double e1 = 0.5 + 1.0 / 3.0 + 0.5;
  const double v = 0.25 + 2.0 / 9.0 + 0.25;
  CHECK(z == doctest::Approx((2.0 - e1) / std::sqrt(v)).epsilon(1e-12));

  // relabeling the arms flips the sign
  const double zf = logrank_z({1, 2, 3, 4}, {1, 1, 1, 1}, {0, 1, 0, 1});
  CHECK(zf == doctest::Approx(-z).epsilon(1e-12));

  // tied death time: hypergeometric variance with d = 2
  const double zt = logrank_z({1, 1, 2}, {1, 1, 0}, {1, 0, 0});
  CHECK(zt == doctest::Approx((1.0 - 2.0 / 3.0) / std::sqrt(2.0 / 9.0)).epsilon(1e-12));

  // censoring-only data has no information
  CHECK(logrank_z({1, 2}, {0, 0}, {1, 0}) == 0.0);
  CHECK_THROWS_AS(logrank_z({1, 2}, {1}, {1, 0}), DataError);
}

TEST_CASE("success probability saturates for a decisive separation") {
  std::vector<SubjectRecord> subs;
  for (int i = 0; i < 10; ++i) {
    subs.push_back(subject("C" + std::to_string(i), 0, 0.0, 1.0 + 0.1 * i, 1));
  }
  for (int i = 0; i < 10; ++i) {
    subs.push_back(subject("T" + std::to_string(i), 1, 0.0, 12.0, 0));
  }
  const TrialSnapshot snap = make_snapshot(subs, months_to_days(12.0));
  const PpdMatrix ppd = synthetic_ppd(snap, 16, [](int, int) { return 500.0; });

  const SuccessProbability win = probability_of_success(ppd, snap, 20, 0.05, false);
  CHECK(win.probability == doctest::Approx(1.0));
  CHECK(win.significant == 16);
  CHECK(win.n_draws == 16);

  const SuccessProbability win1 = probability_of_success(ppd, snap, 20, 0.05, true);
  CHECK(win1.probability == doctest::Approx(1.0));

  // swap the arms: the effect favors control, so the directional test fails
  std::vector<SubjectRecord> flipped = subs;
  for (auto& s : flipped) s.arm = 1 - s.arm;
  const TrialSnapshot snap_f = make_snapshot(flipped, months_to_days(12.0));
  const PpdMatrix ppd_f = synthetic_ppd(snap_f, 16, [](int, int) { return 500.0; });
  CHECK(probability_of_success(ppd_f, snap_f, 20, 0.05, false).probability == 0.0);
  CHECK(probability_of_success(ppd_f, snap_f, 20, 0.05, true).probability == 0.0);

  CHECK_THROWS_AS(probability_of_success(ppd, snap, 10, 0.05, false), ConfigError);
  CHECK_THROWS_AS(probability_of_success(ppd, snap, 21, 0.05, false), ConfigError);
}

TEST_CASE("predicted curves reduce to the observed ones without survivors") {
  std::vector<SubjectRecord> subs;
  subs.push_back(subject("A", 0, 0.0, 2.0, 1));
  subs.push_back(subject("B", 0, 0.0, 4.0, 1));
  subs.push_back(subject("C", 1, 0.0, 3.0, 1));
  subs.push_back(subject("D", 1, 0.0, 6.0, 1));
  const TrialSnapshot snap = make_snapshot(subs, months_to_days(6.0));

  PpdMatrix empty;
  empty.n_draws = 10;
  const PredictedKm km = predicted_km(empty, snap, 1.0, 0.0);

  // completed curves are the all-event product limits of each arm
  REQUIRE(km.grid.size() >= 8);
  auto check_curve = [&](int arm, double t, double s) {
    const size_t gi = static_cast<size_t>(t);
    CHECK(km.grid[gi] == doctest::Approx(t));
    CHECK(km.med[arm][gi] == doctest::Approx(s));
    CHECK(km.lo[arm][gi] == doctest::Approx(s));
    CHECK(km.hi[arm][gi] == doctest::Approx(s));
  };
  check_curve(0, 0.0, 1.0);
  check_curve(0, 2.0, 0.5);
  check_curve(0, 4.0, 0.0);
  check_curve(1, 3.0, 0.5);
  check_curve(1, 6.0, 0.0);

  // tau defaults to the smaller arm maximum; the difference is flat over draws
  CHECK(km.tau == doctest::Approx(4.0));
  REQUIRE(km.rmst_draws.size() == 10);
  // areas on [0,4]: arm1 = 3 + 0.5, arm0 = 2 + 1
  for (double r : km.rmst_draws) CHECK(r == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(km.rmst_median == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(km.rmst_lo == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(km.rmst_hi == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(!km.rmst_extrapolated);
}

TEST_CASE("predicted band quantiles match a direct recomputation") {
  const TrialSnapshot snap = five_subject_snap();
  const PpdMatrix ppd =
      synthetic_ppd(snap, 10, [](int k, int j) { return j == 0 ? 15.0 + k : 8.0 + 2.0 * k; });
  const PredictedKm km = predicted_km(ppd, snap, 0.5, 0.0);

  // completed times per draw: arm0 {10, 8, 8+2k}, arm1 {5, 15+k}; recompute
  // the pointwise quantiles at a probe grid time
  const double probe = 10.0;
  size_t gi = 0;
  while (gi < km.grid.size() && km.grid[gi] != probe) ++gi;
  REQUIRE(gi < km.grid.size());

  std::vector<double> s0, s1;
  for (int k = 0; k < 10; ++k) {
    const KmCurve c0 = kaplan_meier({10.0, 8.0, 8.0 + 2.0 * k}, {1, 1, 1});
    const KmCurve c1 = kaplan_meier({5.0, 15.0 + k}, {1, 1});
    s0.push_back(km_eval(c0, probe));
    s1.push_back(km_eval(c1, probe));
  }
  CHECK(km.med[0][gi] == doctest::Approx(median_of(s0)).epsilon(1e-12));
  CHECK(km.lo[0][gi] == doctest::Approx(quantile_of(s0, 0.05)).epsilon(1e-12));
  CHECK(km.hi[0][gi] == doctest::Approx(quantile_of(s0, 0.95)).epsilon(1e-12));
  CHECK(km.med[1][gi] == doctest::Approx(median_of(s1)).epsilon(1e-12));

  // default tau is the smallest per-draw arm maximum: draw 0 gives min(10, 15)
  CHECK(km.tau == doctest::Approx(10.0));

  // bands are monotone: lo <= med <= hi, and survival never increases in t
  for (int arm = 0; arm < 2; ++arm) {
    for (size_t g = 0; g < km.grid.size(); ++g) {
      CHECK(km.lo[arm][g] <= km.med[arm][g] + 1e-12);
      CHECK(km.med[arm][g] <= km.hi[arm][g] + 1e-12);
      if (g > 0) CHECK(km.med[arm][g] <= km.med[arm][g - 1] + 1e-12);
    }
  }

  // an explicit tau within the support disables extrapolation flagging
  const PredictedKm km2 = predicted_km(ppd, snap, 0.5, 8.0);
  CHECK(km2.tau == doctest::Approx(8.0));
  CHECK(!km2.rmst_extrapolated);

  // single-arm data cannot produce a two-arm band
  std::vector<SubjectRecord> solo;
  solo.push_back(subject("A", 0, 0.0, 2.0, 1));
  solo.push_back(subject("B", 0, 0.0, 4.0, 0));
  const TrialSnapshot snap_solo = make_snapshot(solo, months_to_days(4.0));
  const PpdMatrix ppd_solo = synthetic_ppd(snap_solo, 10, [](int, int) { return 9.0; });
  CHECK_THROWS_AS(predicted_km(ppd_solo, snap_solo, 0.5, 0.0), DataError);
}

TEST_CASE("mixture draws copy whole component rows") {
  const TrialSnapshot snap = five_subject_snap();
  const PpdMatrix comp_a = synthetic_ppd(snap, 50, [](int, int) { return 100.0; });
  const PpdMatrix comp_b = synthetic_ppd(snap, 50, [](int, int) { return 200.0; });

  BmaWeights all_a;
  all_a.models = {"a", "b"};
  all_a.n_iter = 50;
  all_a.w.assign(100, 0.0);
  for (int t = 0; t < 50; ++t) all_a.w[2 * t] = 1.0;
  const PpdMatrix pick_a = bma_ppd(all_a, {comp_a, comp_b}, 9);
  CHECK(pick_a.times == comp_a.times);

  BmaWeights even = all_a;
  for (int t = 0; t < 50; ++t) {
    even.w[2 * t] = 0.5;
    even.w[2 * t + 1] = 0.5;
  }
  const PpdMatrix mix = bma_ppd(even, {comp_a, comp_b}, 9);
  int from_a = 0;
  for (int k = 0; k < 50; ++k) {
    const double v = mix.at(k, 0);
    CHECK((v == 100.0 || v == 200.0));
    CHECK(mix.at(k, 1) == v);  // whole rows move together
    from_a += v == 100.0;
  }
  CHECK(from_a > 10);
  CHECK(from_a < 40);

  // deterministic in the seed
  const PpdMatrix mix2 = bma_ppd(even, {comp_a, comp_b}, 9);
  CHECK(mix.times == mix2.times);
  const PpdMatrix mix3 = bma_ppd(even, {comp_a, comp_b}, 10);
  CHECK(mix.times != mix3.times);

  // validation
  CHECK_THROWS_AS(bma_ppd(even, {}, 9), ConfigError);
  CHECK_THROWS_AS(bma_ppd(even, {comp_a}, 9), ConfigError);
  PpdMatrix short_b = comp_b;
  short_b.n_draws = 49;
  short_b.times.resize(49 * 2);
  short_b.capped.resize(49 * 2);
  CHECK_THROWS_AS(bma_ppd(even, {comp_a, short_b}, 9), DataError);
}

TEST_CASE("model-based predictive draws respect follow-up truncation") {
  GeneratorConfig cfg;
  cfg.scenario = 1;
  cfg.n_subjects = 40;
  cfg.seed = 31;
  const GeneratedTrial trial = generate_trial(cfg);
  const TrialSnapshot snap = snapshot_at_kth_death(trial.full, 15);

  McmcSettings quick;
  quick.chains = 1;
  quick.adapt = 300;
  quick.burn_in = 100;
  quick.iters = 150;
  quick.seed = 3;

  MarginalOsModel marg(snap);
  const PosteriorDraws dm = run_mcmc(marg, PriorSpec{}, quick);
  const PpdMatrix pm = ppd_marginal(marg, dm, snap, 11);
  REQUIRE(pm.n_draws == dm.n_kept());
  REQUIRE(pm.n_alive() == static_cast<int>(snap.alive_indices().size()));
  for (int k = 0; k < pm.n_draws; ++k) {
    for (int j = 0; j < pm.n_alive(); ++j) {
      const auto& s = snap.subjects[pm.subject_index[j]];
      CHECK(pm.at(k, j) > s.os.time);
      CHECK(pm.at(k, j) <= kPpdHorizonMonths * 1.0000001);
    }
  }
  // capped flags match the horizon sentinel
  for (size_t i = 0; i < pm.times.size(); ++i) {
    if (pm.capped[i]) CHECK(pm.times[i] >= kPpdHorizonMonths);
  }

  // the draws are seed-deterministic and thread-invariant
  const PpdMatrix pm2 = ppd_marginal(marg, dm, snap, 11, 3);
  CHECK(pm.times == pm2.times);
  const PpdMatrix pm3 = ppd_marginal(marg, dm, snap, 12);
  CHECK(pm.times != pm3.times);

  MultistateModel ms(snap);
  const PosteriorDraws dms = run_mcmc(ms, PriorSpec{}, quick);
  const PpdMatrix pms = ppd_multistate(ms, dms, snap, 13);
  for (int k = 0; k < pms.n_draws; ++k) {
    for (int j = 0; j < pms.n_alive(); ++j) {
      CHECK(pms.at(k, j) > snap.subjects[pms.subject_index[j]].os.time);
    }
  }
}
