#pragma once

#include <string>
#include <vector>

namespace osm {

// Event time in months since randomization; indicator 1 = observed, 0 = censored.
struct EventTime {
  double time = 0.0;
  int indicator = 0;
};

struct SubjectRecord {
  std::string id;
  int arm = 0;                      // 1 experimental, 0 control
  double randomization_date = 0.0;  // days since epoch
  std::vector<double> covariates;   // baseline covariates, arm excluded
  std::vector<double> tl_times;     // strictly increasing visit times (months)
  std::vector<double> tl_values;    // target-lesion sums (mm)
  EventTime nt;           // first non-target progression
  EventTime nl;           // first new lesion
  EventTime ttp;          // time to progression (death-censored)
  EventTime progression;  // progression for the illness-death structure
  EventTime os;           // overall survival
};

struct TrialSnapshot {
  std::vector<SubjectRecord> subjects;
  double cutoff_date = 0.0;        // days since epoch
  double cutoff_study_time = 0.0;  // months; max over subjects of individual cutoff
  int deaths_observed = 0;

  double subject_cutoff_months(const SubjectRecord& s) const;
  std::vector<int> alive_indices() const;  // subjects with os censored
  int covariate_count() const;
};

// Validates invariants and recounts deaths; used by loaders and generators.
TrialSnapshot make_snapshot(std::vector<SubjectRecord> subjects, double cutoff_date);

// Loads the two-file format. Column layouts:
//   longitudinal: subject_id,visit_time_months,tl_sum_mm
//   events: subject_id,arm,randomization_date,nt_time,nt_event,nl_time,nl_event,
//           ttp_time,ttp_event,prog_time,prog_event,os_time,os_event,cov_1..cov_p
// Cutoff defaults to the latest subject event/censoring calendar date.
TrialSnapshot load_trial(const std::string& longitudinal_csv, const std::string& events_csv,
                         int covariate_count);

// Writes the same format plus a sidecar JSON {cutoff_date, deaths_observed}.
void write_trial(const TrialSnapshot& snap, const std::string& longitudinal_csv,
                 const std::string& events_csv, const std::string& sidecar_json);

// Administrative censoring at the calendar date of the k-th death. Deaths tied
// on that date all count. Requires at least k observed deaths.
TrialSnapshot snapshot_at_kth_death(const TrialSnapshot& full, int k);

// ---------------------------------------------------------------------------
// Kaplan-Meier and restricted-mean summaries.
// ---------------------------------------------------------------------------

struct KmCurve {
  std::vector<double> times;  // event times with at least one death
  std::vector<double> surv;   // S(t) just after each time; S=1 before the first
};

KmCurve kaplan_meier(const std::vector<double>& times, const std::vector<int>& events);
double km_eval(const KmCurve& km, double t);

struct RmstDifference {
  double value = 0.0;        // area(a) - area(b) on [0, tau]
  bool extrapolated = false; // tau ran past the support of either curve
};

RmstDifference rmst_difference(const KmCurve& a, const KmCurve& b, double tau);

}  // namespace osm
