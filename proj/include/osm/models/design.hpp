#pragma once

#include <vector>

#include "osm/trial_data.hpp"

namespace osm {

// Hazard design row [arm, covariates...]; the Weibull scale acts as intercept.
inline std::vector<std::vector<double>> hazard_design(const TrialSnapshot& snap) {
  std::vector<std::vector<double>> z;
  z.reserve(snap.subjects.size());
  for (const auto& s : snap.subjects) {
    std::vector<double> row{static_cast<double>(s.arm)};
    row.insert(row.end(), s.covariates.begin(), s.covariates.end());
    z.push_back(std::move(row));
  }
  return z;
}

// Longitudinal / intercept design row [1, arm, covariates...].
inline std::vector<std::vector<double>> intercept_design(const TrialSnapshot& snap) {
  std::vector<std::vector<double>> x;
  x.reserve(snap.subjects.size());
  for (const auto& s : snap.subjects) {
    std::vector<double> row{1.0, static_cast<double>(s.arm)};
    row.insert(row.end(), s.covariates.begin(), s.covariates.end());
    x.push_back(std::move(row));
  }
  return x;
}

inline double dot_row(const std::vector<double>& row, const double* beta) {
  double s = 0.0;
  for (size_t j = 0; j < row.size(); ++j) s += row[j] * beta[j];
  return s;
}

inline std::vector<std::string> collect_ids(const TrialSnapshot& snap) {
  std::vector<std::string> ids;
  ids.reserve(snap.subjects.size());
  for (const auto& s : snap.subjects) ids.push_back(s.id);
  return ids;
}

inline double mean_positive_time(const std::vector<double>& y) {
  double s = 0.0;
  int n = 0;
  for (double v : y) {
    if (v > 0.0) {
      s += v;
      ++n;
    }
  }
  return n > 0 && s > 0.0 ? s / n : 1.0;
}

}  // namespace osm
