#pragma once

#include <Eigen/Core>

#include <array>
#include <map>
#include <string>
#include <vector>

#include "pgp/ingestion.hpp"

namespace pgp {

double mae(const std::vector<double>& pred, const std::vector<double>& truth);

struct IccResult {
  double value = 0.0;
  bool defined = true;  // false when there is no between-target variance
};

// Shrout-Fleiss ICC(3,1) with the prediction and the truth as the two raters:
// (BMS - EMS) / (BMS + EMS).
IccResult icc31(const std::vector<double>& pred, const std::vector<double>& truth);

// Round half away from zero, clamp to {0, 1, 2}.
int cs_discretize(double value);

using ConfusionMatrix = std::array<std::array<long, 3>, 3>;  // [true][pred]

ConfusionMatrix confusion(const std::vector<int>& pred_labels, const std::vector<int>& true_labels);
double accuracy(const ConfusionMatrix& matrix);
long total(const ConfusionMatrix& matrix);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // population
  std::size_t count = 0;
};

MeanSd mean_sd(const std::vector<double>& values);

struct PairedTTest {
  double t = 0.0;
  double p_value = 1.0;  // two-sided
  int dof = 0;
  double mean_difference = 0.0;
};

// Paired t-test on a - b.
PairedTTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

enum class Transition { cn_to_mci, mci_to_ad, cn_to_ad, mci_to_cn, ad_to_mci, ad_to_cn };
inline constexpr std::array<Transition, 6> kTransitions = {
    Transition::cn_to_mci, Transition::mci_to_ad, Transition::cn_to_ad,
    Transition::mci_to_cn, Transition::ad_to_mci, Transition::ad_to_cn};
const char* to_string(Transition t);

struct ConversionEvent {
  std::string patient_id;
  int visit = 0;  // visit index of the later visit
  int from = 0;
  int to = 0;
  std::array<double, 3> delta{};        // |score_t - score_{t-1}| for MMSE, ADAS13, CDRSB
  std::array<bool, 3> delta_present{};  // both visits recorded the score
};

struct ConversionStats {
  std::map<Transition, long> counts;
  std::vector<ConversionEvent> events;
  // Delta summaries for CN->MCI and MCI->AD, per score.
  std::array<MeanSd, 3> cn_to_mci_delta;
  std::array<MeanSd, 3> mci_to_ad_delta;
};

// Works on raw records: a transition needs CS on both consecutive visits.
ConversionStats conversion_stats(const std::vector<PatientRecord>& patients);

// Per-patient absolute errors of two models on the same prediction points.
struct PatientErrors {
  std::string patient_id;
  std::array<std::vector<double>, kNumTargets> baseline;   // |error| of the reference model
  std::array<std::vector<double>, kNumTargets> candidate;  // |error| of the compared model
};

struct PatientImprovementRow {
  std::string patient_id;
  double baseline_mae = 0.0;
  double candidate_mae = 0.0;
  double improvement = 0.0;  // baseline - candidate
};

struct PerPatientReport {
  // Per target, rows sorted by descending improvement.
  std::array<std::vector<PatientImprovementRow>, kNumTargets> rows;
  std::array<double, kNumTargets> fraction_improved{};
};

PerPatientReport per_patient_report(const std::vector<PatientErrors>& patients);

}  // namespace pgp
