#pragma once

// Cohort whose clinical-status transitions total 14 CN->MCI, 27 MCI->AD,
// 1 CN->AD, 3 MCI->CN, 1 AD->MCI and 0 AD->CN.

#include <string>
#include <vector>

#include "records.hpp"

namespace pgp::testing {

inline PatientRecord cs_patient(const std::string& id, const std::vector<double>& cs) {
  std::vector<std::vector<double>> f;
  std::vector<std::array<double, 4>> y;
  for (std::size_t t = 0; t < cs.size(); ++t) {
    f.push_back({static_cast<double>(t)});
    y.push_back({28.0 - static_cast<double>(t), 10.0 + 2.0 * static_cast<double>(t), 0.5 * static_cast<double>(t), cs[t]});
  }
  return make_record(id, f, y);
}

inline std::vector<PatientRecord> transition_fixture() {
  std::vector<PatientRecord> out;
  int id = 1;
  const auto add = [&](int copies, const std::vector<double>& cs) {
    for (int i = 0; i < copies; ++i) out.push_back(cs_patient(std::to_string(id++), cs));
  };
  add(11, {0, 0, 1, 2, 2});
  add(3, {0, 1, 0});
  add(15, {1, 1, 2});
  add(1, {2, 1, 2});
  add(1, {0, 2});
  add(4, {0, 0, 0});
  add(2, {1, kMiss, 2});  // gap: no transition counted
  add(2, {2, 2});
  return out;
}

}  // namespace pgp::testing
