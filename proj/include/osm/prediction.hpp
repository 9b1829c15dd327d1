#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osm/bma.hpp"
#include "osm/mcmc.hpp"
#include "osm/models/clayton_pair.hpp"
#include "osm/models/marginal_os.hpp"
#include "osm/models/multistate.hpp"
#include "osm/models/spjm.hpp"
#include "osm/models/tl_os.hpp"
#include "osm/trial_data.hpp"

namespace osm {

// Posterior-predictive death times for the subjects alive at the snapshot.
// Row k = merged posterior draw k; entries are months since randomization,
// always beyond the subject's follow-up, capped at `horizon` with a flag.
struct PpdMatrix {
  std::vector<std::string> subject_ids;
  std::vector<int> subject_index;  // into snapshot.subjects
  int n_draws = 0;
  std::vector<double> times;    // [draw][alive]
  std::vector<std::uint8_t> capped;
  double horizon = 600.0;

  int n_alive() const { return static_cast<int>(subject_ids.size()); }
  double at(int draw, int j) const { return times[static_cast<size_t>(draw) * n_alive() + j]; }
};

inline constexpr double kPpdHorizonMonths = 600.0;

PpdMatrix ppd_marginal(const MarginalOsModel& model, const PosteriorDraws& draws,
                       const TrialSnapshot& snap, std::uint64_t seed, int threads = 1);
PpdMatrix ppd_tl_os(const TlOsModel& model, const PosteriorDraws& draws, const TrialSnapshot& snap,
                    std::uint64_t seed, int threads = 1);
PpdMatrix ppd_clayton(const ClaytonPairModel& model, const PosteriorDraws& draws,
                      const TrialSnapshot& snap, std::uint64_t seed, int threads = 1);
PpdMatrix ppd_spjm(const SpjmModel& model, const PosteriorDraws& draws, const TrialSnapshot& snap,
                   std::uint64_t seed, int threads = 1);
PpdMatrix ppd_multistate(const MultistateModel& model, const PosteriorDraws& draws,
                         const TrialSnapshot& snap, std::uint64_t seed, int threads = 1);

// Mixture PPD: one categorical model pick per iteration using that iteration's
// weights. Component matrices must share subjects and draw counts.
PpdMatrix bma_ppd(const BmaWeights& weights, const std::vector<PpdMatrix>& components,
                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Milestone and decision summaries.
// ---------------------------------------------------------------------------

struct MilestoneForecast {
  int target_n = 0;
  std::vector<double> draw_dates;  // per iteration, days since epoch
  double median_date = 0.0;        // days since epoch
  double hpd_lo = 0.0, hpd_hi = 0.0;
  double median_months_after_cutoff = 0.0;
  bool any_capped = false;
};

// Calendar time of the n-th death pooling observed deaths and one predicted
// completion per iteration. Requires deaths_observed < n <= total subjects.
MilestoneForecast milestone_nth_death(const PpdMatrix& ppd, const TrialSnapshot& snap, int n,
                                      double hpd_mass = 0.9);

struct DeathCountSummary {
  double query_date = 0.0;
  std::vector<int> draws;
  double mean = 0.0;
  double median = 0.0;
  double q05 = 0.0, q95 = 0.0;
};

// Distribution of the total death count at a calendar date >= cutoff.
DeathCountSummary death_count_at(const PpdMatrix& ppd, const TrialSnapshot& snap,
                                 double date_days);

struct SuccessProbability {
  double probability = 0.0;
  int significant = 0;
  int n_draws = 0;
  double alpha = 0.05;
  bool one_sided = false;
};

// Fraction of completed datasets whose log-rank test at the target_n-th death
// is significant in favor of the experimental arm. Two-sided level alpha with
// a direction check by default; one_sided switches to a one-sided level.
SuccessProbability probability_of_success(const PpdMatrix& ppd, const TrialSnapshot& snap,
                                          int target_n, double alpha = 0.05,
                                          bool one_sided = false);

// Two-sample log-rank: returns the normalized statistic z for arm 1 vs arm 0
// (negative z favors arm 1: fewer deaths than expected).
double logrank_z(const std::vector<double>& times, const std::vector<int>& events,
                 const std::vector<int>& arms);

struct PredictedKm {
  std::vector<double> grid;                 // months
  std::vector<double> med[2], lo[2], hi[2]; // per arm pointwise band
  std::vector<double> rmst_draws;           // arm1 minus arm0 at tau
  double rmst_median = 0.0;
  double rmst_lo = 0.0, rmst_hi = 0.0;
  double tau = 0.0;
  bool rmst_extrapolated = false;
};

// Pointwise median and 90% band of the completed-trial survival curves per arm
// plus the restricted-mean difference at horizon tau (<= 0 picks the smallest
// per-arm maximum across iterations).
PredictedKm predicted_km(const PpdMatrix& ppd, const TrialSnapshot& snap, double grid_step = 0.5,
                         double tau = 0.0);

}  // namespace osm
