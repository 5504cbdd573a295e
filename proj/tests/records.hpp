#pragma once

// Hand-built patient records. NaN marks a missing cell.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pgp/ingestion.hpp"

namespace pgp::testing {

inline constexpr double kMiss = std::numeric_limits<double>::quiet_NaN();

inline PatientRecord make_record(const std::string& id, const std::vector<std::vector<double>>& features,
                                 const std::vector<std::array<double, 4>>& targets) {
  PatientRecord r;
  r.patient_id = id;
  for (std::size_t t = 0; t < features.size(); ++t) {
    Visit v;
    v.visit_index = static_cast<int>(t);
    v.month = 6 * static_cast<int>(t);
    const auto d = static_cast<Eigen::Index>(features[t].size());
    v.features.resize(d);
    v.feature_present.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double x = features[t][static_cast<std::size_t>(j)];
      v.feature_present(j) = !std::isnan(x);
      v.features(j) = std::isnan(x) ? kSentinel : x;
    }
    for (int k = 0; k < 4; ++k) {
      const double y = targets[t][static_cast<std::size_t>(k)];
      v.target_present(k) = !std::isnan(y);
      v.targets(k) = std::isnan(y) ? kSentinel : y;
    }
    r.visits.push_back(std::move(v));
  }
  r.missing_fraction = compute_missing_fraction(r);
  return r;
}

// Patient with `visits` visits, `d` features, a fraction of feature cells
// missing (the first cells in row-major order) and complete targets.
inline PatientRecord patient_with(const std::string& id, int visits, int d, int missing_cells) {
  std::vector<std::vector<double>> f(static_cast<std::size_t>(visits), std::vector<double>(static_cast<std::size_t>(d), 1.0));
  std::vector<std::array<double, 4>> y(static_cast<std::size_t>(visits), {28.0, 10.0, 1.0, 0.0});
  int left = missing_cells;
  for (auto& row : f) {
    for (auto& x : row) {
      if (left > 0) {
        x = kMiss;
        --left;
      }
    }
  }
  return make_record(id, f, y);
}

}  // namespace pgp::testing
