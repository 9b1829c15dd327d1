#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "osm/common.hpp"
#include "osm/simulation.hpp"
#include "osm/stats.hpp"
#include "osm/trial_data.hpp"

using namespace osm;

namespace {

struct DependenceStats {
  double tau_nl_os = 0.0;    // among subjects with an observed lesion event
  double tau_tl_death = 0.0; // first lesion measurement vs true death time
  double arm_gap = 0.0;      // mean death-time difference, arm 1 minus arm 0
};

DependenceStats measure(int scenario, int n, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.scenario = scenario;
  cfg.n_subjects = n;
  cfg.seed = seed;
  const GeneratedTrial tr = generate_trial(cfg);
  std::vector<double> nlt, ost, tl0, dm;
  double sum[2] = {0.0, 0.0};
  int cnt[2] = {0, 0};
  for (size_t i = 0; i < tr.full.subjects.size(); ++i) {
    const auto& s = tr.full.subjects[i];
    if (s.nl.indicator == 1) {
      nlt.push_back(s.nl.time);
      ost.push_back(tr.death_months[i]);
    }
    if (!s.tl_values.empty()) {
      tl0.push_back(s.tl_values[0]);
      dm.push_back(tr.death_months[i]);
    }
    sum[s.arm] += tr.death_months[i];
    cnt[s.arm] += 1;
  }
  DependenceStats out;
  out.tau_nl_os = kendall_tau(nlt, ost);
  out.tau_tl_death = kendall_tau(tl0, dm);
  out.arm_gap = sum[1] / cnt[1] - sum[0] / cnt[0];
  return out;
}

}  // namespace

TEST_CASE("visit schedule densifies early and coarsens late") {
  const std::vector<double> v = visit_schedule();
  REQUIRE(v.size() == 25);
  CHECK(v.front() == 0.0);
  CHECK(v[1] == 2.0);
  CHECK(v[12] == 24.0);
  CHECK(v[13] == 27.0);
  CHECK(v.back() == 60.0);
  for (size_t i = 1; i < v.size(); ++i) CHECK(v[i] - v[i - 1] == (v[i] <= 24.0 ? 2.0 : 3.0));

  const std::vector<double> shorter = visit_schedule(10.0);
  REQUIRE(shorter.size() == 6);
  CHECK(shorter.back() == 10.0);
}

TEST_CASE("generated trials satisfy the record invariants") {
  GeneratorConfig cfg;
  cfg.scenario = 2;
  cfg.n_subjects = 120;
  cfg.seed = 19;
  const GeneratedTrial tr = generate_trial(cfg);

  REQUIRE(tr.full.subjects.size() == 120);
  CHECK(tr.full.deaths_observed == 120);  // the full trial runs to the last death
  CHECK(tr.full.cutoff_date == tr.last_death_date);
  CHECK(tr.last_death_months ==
        *std::max_element(tr.death_months.begin(), tr.death_months.end()));

  for (size_t i = 0; i < tr.full.subjects.size(); ++i) {
    const auto& s = tr.full.subjects[i];
    CHECK(s.arm == static_cast<int>(i) % 2);
    CHECK(s.randomization_date == 0.0);
    CHECK(s.os.indicator == 1);
    CHECK(s.os.time == tr.death_months[i]);
    CHECK(s.nt.indicator == 0);  // never generated here
    CHECK(s.ttp.time == s.nl.time);
    CHECK(s.ttp.indicator == s.nl.indicator);
    CHECK(s.progression.time == s.nl.time);

    const double admin = std::min(s.os.time, cfg.visit_horizon);
    if (s.nl.indicator == 1) {
      CHECK(s.nl.time <= admin + 1e-9);
    } else {
      CHECK(s.nl.time == doctest::Approx(admin));
    }
    for (double t : s.tl_times) CHECK(t <= admin + 1e-6);
    CHECK(!s.tl_times.empty());  // every subject has the baseline visit
  }
  CHECK(tr.full.subjects[0].id == "S0001");
  CHECK(tr.full.subjects[119].id == "S0120");
}

TEST_CASE("generation is a pure function of the seed") {
  GeneratorConfig cfg;
  cfg.scenario = 4;
  cfg.n_subjects = 50;
  cfg.seed = 123;
  const GeneratedTrial a = generate_trial(cfg);
  const GeneratedTrial b = generate_trial(cfg);
  CHECK(a.death_months == b.death_months);
  for (size_t i = 0; i < a.full.subjects.size(); ++i) {
    CHECK(a.full.subjects[i].tl_values == b.full.subjects[i].tl_values);
    CHECK(a.full.subjects[i].nl.time == b.full.subjects[i].nl.time);
  }
  cfg.seed = 124;
  const GeneratedTrial c = generate_trial(cfg);
  CHECK(a.death_months != c.death_months);

  GeneratorConfig bad = cfg;
  bad.scenario = 5;
  CHECK_THROWS_AS(generate_trial(bad), ConfigError);
  bad = cfg;
  bad.n_subjects = 1;
  CHECK_THROWS_AS(generate_trial(bad), ConfigError);
  bad = cfg;
  bad.tl_mix = 1.5;
  CHECK_THROWS_AS(generate_trial(bad), ConfigError);
}

TEST_CASE("scenarios produce their designed dependence structure") {
  const int n = 2000;
  const DependenceStats s1 = measure(1, n, 777);
  const DependenceStats s2 = measure(2, n, 777);
  const DependenceStats s3 = measure(3, n, 777);
  const DependenceStats s4 = measure(4, n, 777);

  // independence scenario: the lesion level carries no survival signal
  CHECK(std::abs(s1.tau_tl_death) < 0.08);

  // copula scenarios raise the lesion/survival concordance well above the
  // truncation baseline, and the stronger copula raises it further
  CHECK(s2.tau_nl_os - s1.tau_nl_os > 0.2);
  CHECK(s4.tau_nl_os > s2.tau_nl_os + 0.05);

  // trajectory-linked scenario: big lesions mean early death
  CHECK(s3.tau_tl_death < -0.5);
  CHECK(std::abs(s3.tau_nl_os - s1.tau_nl_os) < 0.1);

  // the blended scenario inherits a weaker trajectory link
  CHECK(s4.tau_tl_death < -0.1);

  // the protective treatment effect shows up in every scenario
  for (const auto& s : {s1, s2, s3, s4}) CHECK(s.arm_gap > 3.0);
}

TEST_CASE("cell aggregation reproduces hand-computed error summaries") {
  auto row = [](int k, const std::string& m, double truth, double pred, double lo, double hi,
                bool failed) {
    ReplicateResult r;
    r.scenario = 2;
    r.k = k;
    r.method = m;
    r.truth_months = truth;
    r.pred_months = pred;
    r.lo_months = lo;
    r.hi_months = hi;
    r.failed = failed;
    return r;
  };

  std::vector<ReplicateResult> rows;
  // perfect predictor at k=10
  rows.push_back(row(10, "a", 50.0, 50.0, 45.0, 55.0, false));
  rows.push_back(row(10, "a", 60.0, 60.0, 52.0, 64.0, false));
  // constant +5 offset at k=20 with one non-covering interval
  rows.push_back(row(20, "a", 50.0, 55.0, 53.0, 58.0, false));
  rows.push_back(row(20, "a", 60.0, 65.0, 55.0, 66.0, false));
  // mixed errors {+3, -1} for method b, plus one failure
  rows.push_back(row(10, "b", 50.0, 53.0, 48.0, 56.0, false));
  rows.push_back(row(10, "b", 60.0, 59.0, 58.0, 62.0, false));
  rows.push_back(row(10, "b", 70.0, 0.0, 0.0, 0.0, true));

  const std::vector<EvalCell> cells = aggregate_cells(rows);
  REQUIRE(cells.size() == 3);

  CHECK(cells[0].k == 10);
  CHECK(cells[0].method == "a");
  CHECK(cells[0].bias == doctest::Approx(0.0));
  CHECK(cells[0].rmse == doctest::Approx(0.0));
  CHECK(cells[0].cr == doctest::Approx(1.0));
  CHECK(cells[0].width == doctest::Approx(11.0));
  CHECK(cells[0].n_fail == 0);
  CHECK(cells[0].n_ok == 2);

  CHECK(cells[1].k == 20);
  CHECK(cells[1].bias == doctest::Approx(5.0));
  CHECK(cells[1].rmse == doctest::Approx(5.0));
  CHECK(cells[1].cr == doctest::Approx(0.5));  // truth 50 not in [53,58]

  CHECK(cells[2].method == "b");
  CHECK(cells[2].bias == doctest::Approx(1.0));
  CHECK(cells[2].rmse == doctest::Approx(std::sqrt(5.0)));
  // the identity rmse^2 = bias^2 + population variance of the errors
  const double popvar = ((3.0 - 1.0) * (3.0 - 1.0) + (-1.0 - 1.0) * (-1.0 - 1.0)) / 2.0;
  CHECK(cells[2].rmse * cells[2].rmse ==
        doctest::Approx(cells[2].bias * cells[2].bias + popvar).epsilon(1e-12));
  CHECK(cells[2].n_fail == 1);
  CHECK(cells[2].n_ok == 2);
}

TEST_CASE("study harness scores replicates deterministically") {
  StudyConfig sc;
  sc.generator.scenario = 1;
  sc.generator.n_subjects = 30;
  sc.replicates = 2;
  sc.snapshot_ks = {10, 20};
  sc.methods = {"marginal"};
  sc.mcmc.chains = 1;
  sc.mcmc.adapt = 300;
  sc.mcmc.burn_in = 100;
  sc.mcmc.iters = 300;
  sc.seed = 42;
  sc.target_n = 0;  // last death

  const EvalReport rep = run_study(sc);
  REQUIRE(rep.rows.size() == 4);
  REQUIRE(rep.cells.size() == 2);
  for (const auto& r : rep.rows) {
    CHECK(!r.failed);
    CHECK(r.truth_months > 0.0);
    CHECK(r.lo_months <= r.pred_months);
    CHECK(r.pred_months <= r.hi_months);
  }
  // same replicate, same generated trial, same milestone truth
  CHECK(rep.rows[0].truth_months == rep.rows[1].truth_months);
  CHECK(rep.rows[2].truth_months == rep.rows[3].truth_months);
  CHECK(rep.rows[0].truth_months != rep.rows[2].truth_months);

  // the whole report is a function of the config, and threads do not leak in
  const EvalReport again = run_study(sc);
  StudyConfig par = sc;
  par.threads = 2;
  const EvalReport parallel = run_study(par);
  for (size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(rep.rows[i].pred_months == again.rows[i].pred_months);
    CHECK(rep.rows[i].pred_months == parallel.rows[i].pred_months);
    CHECK(rep.rows[i].lo_months == parallel.rows[i].lo_months);
  }

  // a milestone that the later snapshot has already reached fails cleanly
  StudyConfig reached = sc;
  reached.replicates = 1;
  reached.target_n = 15;
  const EvalReport rr = run_study(reached);
  REQUIRE(rr.rows.size() == 2);
  CHECK(!rr.rows[0].failed);  // k=10 precedes the 15th death
  CHECK(rr.rows[1].failed);   // k=20 has passed it
  for (const auto& c : rr.cells) {
    if (c.k == 20) {
      CHECK(c.n_fail == 1);
      CHECK(c.n_ok == 0);
    }
  }

  StudyConfig bad = sc;
  bad.snapshot_ks = {40};
  CHECK_THROWS_AS(run_study(bad), ConfigError);
  bad = sc;
  bad.methods = {};
  CHECK_THROWS_AS(run_study(bad), ConfigError);
}

TEST_CASE("unknown method names are rejected up front") {
  GeneratorConfig cfg;
  cfg.scenario = 1;
  cfg.n_subjects = 20;
  cfg.seed = 2;
  const GeneratedTrial tr = generate_trial(cfg);
  const TrialSnapshot snap = snapshot_at_kth_death(tr.full, 10);
  McmcSettings quick;
  quick.chains = 1;
  quick.adapt = 100;
  quick.burn_in = 50;
  quick.iters = 100;
  CHECK_THROWS_AS(fit_and_ppd("bogus", snap, PriorSpec{}, quick, 1), ConfigError);
}

TEST_CASE("the averaging method produces a usable predictive matrix") {
  GeneratorConfig cfg;
  cfg.scenario = 2;
  cfg.n_subjects = 24;
  cfg.seed = 6;
  const GeneratedTrial tr = generate_trial(cfg);
  const TrialSnapshot snap = snapshot_at_kth_death(tr.full, 12);

  McmcSettings quick;
  quick.chains = 1;
  quick.adapt = 200;
  quick.burn_in = 50;
  quick.iters = 120;
  quick.seed = 9;

  bool conv = true;
  const PpdMatrix ppd = fit_and_ppd("bave", snap, PriorSpec{}, quick, 17, &conv);
  CHECK(ppd.n_draws == 120);
  REQUIRE(ppd.n_alive() == static_cast<int>(snap.alive_indices().size()));
  for (int k = 0; k < ppd.n_draws; ++k) {
    for (int j = 0; j < ppd.n_alive(); ++j) {
      CHECK(ppd.at(k, j) > snap.subjects[ppd.subject_index[j]].os.time);
      CHECK(ppd.at(k, j) <= kPpdHorizonMonths * 1.0000001);
    }
  }

  // deterministic end to end
  const PpdMatrix ppd2 = fit_and_ppd("bave", snap, PriorSpec{}, quick, 17);
  CHECK(ppd.times == ppd2.times);
}
