#include "osm/trial_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"
#include "osm/common.hpp"

namespace osm {

namespace {

constexpr double kEps = 1e-9;

void validate_subject(const SubjectRecord& s) {
  const std::string who = "subject '" + s.id + "'";
  for (const EventTime* e : {&s.nt, &s.nl, &s.ttp, &s.progression, &s.os}) {
    if (e->time < 0.0) throw DataError(who + ": negative event time");
    if (e->indicator != 0 && e->indicator != 1) throw DataError(who + ": bad event indicator");
  }
  if (s.tl_times.size() != s.tl_values.size()) throw DataError(who + ": tl series length mismatch");
  for (size_t j = 0; j < s.tl_times.size(); ++j) {
    if (s.tl_times[j] < 0.0) throw DataError(who + ": negative tl visit time");
    if (j > 0 && s.tl_times[j] <= s.tl_times[j - 1]) {
      throw DataError(who + ": tl visit times not strictly increasing");
    }
  }
  if (s.os.indicator == 1) {
    for (double t : s.tl_times) {
      if (t > s.os.time + kEps) throw DataError(who + ": tl measurement after death");
    }
  }
  if (s.ttp.time > s.os.time + kEps) throw DataError(who + ": ttp time exceeds os time");
  if (s.progression.time > s.os.time + kEps) {
    throw DataError(who + ": progression time exceeds os time");
  }
  if (s.arm != 0 && s.arm != 1) throw DataError(who + ": arm must be 0 or 1");
}

}  // namespace

double TrialSnapshot::subject_cutoff_months(const SubjectRecord& s) const {
  return days_to_months(cutoff_date - s.randomization_date);
}

std::vector<int> TrialSnapshot::alive_indices() const {
  std::vector<int> out;
  for (size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].os.indicator == 0) out.push_back(static_cast<int>(i));
  }
  return out;
}

int TrialSnapshot::covariate_count() const {
  return subjects.empty() ? 0 : static_cast<int>(subjects.front().covariates.size());
}

TrialSnapshot make_snapshot(std::vector<SubjectRecord> subjects, double cutoff_date) {
  TrialSnapshot snap;
  snap.subjects = std::move(subjects);
  snap.cutoff_date = cutoff_date;
  size_t p = snap.subjects.empty() ? 0 : snap.subjects.front().covariates.size();
  for (const auto& s : snap.subjects) {
    validate_subject(s);
    if (s.covariates.size() != p) throw DataError("inconsistent covariate count across subjects");
    const double ci = days_to_months(cutoff_date - s.randomization_date);
    if (s.os.time > ci + kEps) {
      throw DataError("subject '" + s.id + "': os follow-up exceeds snapshot cutoff");
    }
    snap.cutoff_study_time = std::max(snap.cutoff_study_time, ci);
    snap.deaths_observed += s.os.indicator;
  }
  return snap;
}

TrialSnapshot load_trial(const std::string& longitudinal_csv, const std::string& events_csv,
                         int covariate_count) {
  if (covariate_count < 0) throw ConfigError("covariate_count must be >= 0");
  const auto event_lines = read_lines(events_csv);
  if (event_lines.empty()) throw DataError("events file is empty: " + events_csv);

  std::vector<std::string> header = {"subject_id", "arm",       "randomization_date",
                                     "nt_time",    "nt_event",  "nl_time",
                                     "nl_event",   "ttp_time",  "ttp_event",
                                     "prog_time",  "prog_event", "os_time",
                                     "os_event"};
  for (int j = 1; j <= covariate_count; ++j) header.push_back("cov_" + std::to_string(j));
  const auto head_fields = split_csv_line(event_lines[0]);
  if (head_fields != header) {
    throw DataError("events header mismatch in " + events_csv + " (expected " +
                    std::to_string(header.size()) + " columns for " +
                    std::to_string(covariate_count) + " covariates)");
  }

  std::vector<SubjectRecord> subjects;
  std::map<std::string, size_t> index;
  for (size_t ln = 1; ln < event_lines.size(); ++ln) {
    if (event_lines[ln].empty()) continue;
    const auto f = split_csv_line(event_lines[ln]);
    const std::string ctx = events_csv + ":" + std::to_string(ln + 1);
    if (f.size() != header.size()) throw DataError("wrong column count in " + ctx);
    SubjectRecord s;
    s.id = f[0];
    if (s.id.empty()) throw DataError("empty subject_id in " + ctx);
    if (index.count(s.id)) throw DataError("duplicate subject_id '" + s.id + "' in " + ctx);
    if (f[1] == "Experimental" || f[1] == "1") {
      s.arm = 1;
    } else if (f[1] == "Control" || f[1] == "0") {
      s.arm = 0;
    } else {
      throw DataError("arm must be Experimental or Control in " + ctx);
    }
    s.randomization_date = parse_iso_date(f[2]);
    EventTime* events[5] = {&s.nt, &s.nl, &s.ttp, &s.progression, &s.os};
    for (int e = 0; e < 5; ++e) {
      events[e]->time = parse_double_field(f[3 + 2 * e], ctx);
      events[e]->indicator = parse_indicator_field(f[4 + 2 * e], ctx);
    }
    for (int j = 0; j < covariate_count; ++j) {
      s.covariates.push_back(parse_double_field(f[13 + j], ctx));
    }
    index[s.id] = subjects.size();
    subjects.push_back(std::move(s));
  }
  if (subjects.empty()) throw DataError("events file has no subjects: " + events_csv);

  const auto long_lines = read_lines(longitudinal_csv);
  if (long_lines.empty() || split_csv_line(long_lines[0]) !=
                  std::vector<std::string>{"subject_id", "visit_time_months", "tl_sum_mm"}) {
    throw DataError("longitudinal header mismatch in " + longitudinal_csv);
  }
  std::set<std::pair<std::string, double>> seen;
  for (size_t ln = 1; ln < long_lines.size(); ++ln) {
    if (long_lines[ln].empty()) continue;
    const auto f = split_csv_line(long_lines[ln]);
    const std::string ctx = longitudinal_csv + ":" + std::to_string(ln + 1);
    if (f.size() != 3) throw DataError("wrong column count in " + ctx);
    const auto it = index.find(f[0]);
    if (it == index.end()) {
      throw DataError("longitudinal row references missing subject '" + f[0] + "' in " + ctx);
    }
    const double t = parse_double_field(f[1], ctx);
    const double v = parse_double_field(f[2], ctx);
    if (!seen.insert({f[0], t}).second) {
      throw DataError("duplicate (subject, visit-time) row in " + ctx);
    }
    subjects[it->second].tl_times.push_back(t);
    subjects[it->second].tl_values.push_back(v);
  }
  for (auto& s : subjects) {
    std::vector<size_t> order(s.tl_times.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return s.tl_times[a] < s.tl_times[b]; });
    std::vector<double> tt, vv;
    for (size_t j : order) {
      tt.push_back(s.tl_times[j]);
      vv.push_back(s.tl_values[j]);
    }
    s.tl_times = std::move(tt);
    s.tl_values = std::move(vv);
  }

  double cutoff = 0.0;
  for (const auto& s : subjects) {
    cutoff = std::max(cutoff, s.randomization_date + months_to_days(s.os.time));
  }
  return make_snapshot(std::move(subjects), cutoff);
}

void write_trial(const TrialSnapshot& snap, const std::string& longitudinal_csv,
                 const std::string& events_csv, const std::string& sidecar_json) {
  const int p = snap.covariate_count();
  {
    std::ofstream ev(events_csv);
    if (!ev) throw DataError("cannot write " + events_csv);
    ev << "subject_id,arm,randomization_date,nt_time,nt_event,nl_time,nl_event,"
          "ttp_time,ttp_event,prog_time,prog_event,os_time,os_event";
    for (int j = 1; j <= p; ++j) ev << ",cov_" << j;
    ev << "\n";
    for (const auto& s : snap.subjects) {
      ev << s.id << ',' << (s.arm ? "Experimental" : "Control") << ','
         << format_iso_date(s.randomization_date);
      for (const EventTime* e : {&s.nt, &s.nl, &s.ttp, &s.progression, &s.os}) {
        ev << ',' << fmt_double(e->time) << ',' << e->indicator;
      }
      for (double c : s.covariates) ev << ',' << fmt_double(c);
      ev << "\n";
    }
  }
  {
    std::ofstream lg(longitudinal_csv);
    if (!lg) throw DataError("cannot write " + longitudinal_csv);
    lg << "subject_id,visit_time_months,tl_sum_mm\n";
    for (const auto& s : snap.subjects) {
      for (size_t j = 0; j < s.tl_times.size(); ++j) {
        lg << s.id << ',' << fmt_double(s.tl_times[j]) << ',' << fmt_double(s.tl_values[j])
           << "\n";
      }
    }
  }
  {
    nlohmann::json side;
    side["cutoff_date"] = format_iso_date(snap.cutoff_date);
    side["cutoff_days"] = snap.cutoff_date;
    side["deaths_observed"] = snap.deaths_observed;
    std::ofstream js(sidecar_json);
    if (!js) throw DataError("cannot write " + sidecar_json);
    js << side.dump(2) << "\n";
  }
}

TrialSnapshot snapshot_at_kth_death(const TrialSnapshot& full, int k) {
  if (k < 1) throw ConfigError("snapshot death count k must be >= 1");
  std::vector<double> death_dates;
  for (const auto& s : full.subjects) {
    if (s.os.indicator == 1) {
      death_dates.push_back(s.randomization_date + months_to_days(s.os.time));
    }
  }
  if (static_cast<int>(death_dates.size()) < k) {
    throw DataError("snapshot_at_kth_death: only " + std::to_string(death_dates.size()) +
                    " deaths available, need " + std::to_string(k));
  }
  std::nth_element(death_dates.begin(), death_dates.begin() + (k - 1), death_dates.end());
  const double cutoff = death_dates[k - 1];

  std::vector<SubjectRecord> out;
  for (const auto& s : full.subjects) {
    if (s.randomization_date > cutoff + kEps) continue;  // not yet enrolled
    const double ci = days_to_months(cutoff - s.randomization_date);
    SubjectRecord r = s;
    for (EventTime* e : {&r.nt, &r.nl, &r.ttp, &r.progression, &r.os}) {
      if (e->time > ci + kEps) {
        e->time = ci;
        e->indicator = 0;
      }
    }
    std::vector<double> tt, vv;
    for (size_t j = 0; j < r.tl_times.size(); ++j) {
      if (r.tl_times[j] <= ci + kEps) {
        tt.push_back(r.tl_times[j]);
        vv.push_back(r.tl_values[j]);
      }
    }
    r.tl_times = std::move(tt);
    r.tl_values = std::move(vv);
    out.push_back(std::move(r));
  }
  return make_snapshot(std::move(out), cutoff);
}

// ---------------------------------------------------------------------------

KmCurve kaplan_meier(const std::vector<double>& times, const std::vector<int>& events) {
  if (times.size() != events.size()) throw DataError("kaplan_meier: length mismatch");
  std::vector<size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return times[a] < times[b]; });

  KmCurve km;
  double s = 1.0;
  double n_risk = static_cast<double>(times.size());
  size_t i = 0;
  while (i < order.size()) {
    const double t = times[order[i]];
    int d = 0, c = 0;
    while (i < order.size() && times[order[i]] == t) {
      (events[order[i]] == 1 ? d : c) += 1;
      ++i;
    }
    if (d > 0) {
      s *= 1.0 - d / n_risk;
      km.times.push_back(t);
      km.surv.push_back(s);
    }
    n_risk -= d + c;
  }
  return km;
}

double km_eval(const KmCurve& km, double t) {
  const auto it = std::upper_bound(km.times.begin(), km.times.end(), t);
  if (it == km.times.begin()) return 1.0;
  return km.surv[static_cast<size_t>(it - km.times.begin()) - 1];
}

namespace {

double km_area(const KmCurve& km, double tau) {
  double area = 0.0, s = 1.0, prev = 0.0;
  for (size_t j = 0; j < km.times.size() && km.times[j] < tau; ++j) {
    area += s * (km.times[j] - prev);
    s = km.surv[j];
    prev = km.times[j];
  }
  return area + s * (tau - prev);
}

}  // namespace

RmstDifference rmst_difference(const KmCurve& a, const KmCurve& b, double tau) {
  if (tau <= 0.0) throw ConfigError("rmst horizon tau must be positive");
  RmstDifference out;
  out.value = km_area(a, tau) - km_area(b, tau);
  const bool beyond_a = !a.times.empty() && tau > a.times.back();
  const bool beyond_b = !b.times.empty() && tau > b.times.back();
  out.extrapolated = beyond_a || beyond_b;
  return out;
}

}  // namespace osm
