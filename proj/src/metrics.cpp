#include "pgp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "pgp/error.hpp"

namespace pgp {

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size()) throw InputError("mae: length mismatch");
  if (pred.empty()) throw InputError("mae: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

IccResult icc31(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size()) throw InputError("icc31: length mismatch");
  if (pred.size() < 2) throw InputError("icc31: need at least two pairs");
  const double n = static_cast<double>(pred.size());
  const double k = 2.0;

  double grand = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) grand += pred[i] + truth[i];
  grand /= n * k;

  double mean_pred = 0.0;
  double mean_truth = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mean_pred += pred[i];
    mean_truth += truth[i];
  }
  mean_pred /= n;
  mean_truth /= n;

  double ss_rows = 0.0;
  double ss_total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double row_mean = 0.5 * (pred[i] + truth[i]);
    ss_rows += k * (row_mean - grand) * (row_mean - grand);
    ss_total += (pred[i] - grand) * (pred[i] - grand) + (truth[i] - grand) * (truth[i] - grand);
  }
  const double ss_cols =
      n * ((mean_pred - grand) * (mean_pred - grand) + (mean_truth - grand) * (mean_truth - grand));
  const double ss_error = std::max(ss_total - ss_rows - ss_cols, 0.0);

  const double bms = ss_rows / (n - 1.0);
  const double ems = ss_error / ((n - 1.0) * (k - 1.0));
  const double denom = bms + (k - 1.0) * ems;
  if (!(bms > 0.0) || !(denom > 0.0)) {
    return {std::numeric_limits<double>::quiet_NaN(), false};
  }
  return {(bms - ems) / denom, true};
}

int cs_discretize(double value) {
  if (!std::isfinite(value)) throw InputError("cs_discretize: non-finite value");
  const double r = std::round(value);  // half away from zero
  return static_cast<int>(std::clamp(r, 0.0, 2.0));
}

ConfusionMatrix confusion(const std::vector<int>& pred_labels, const std::vector<int>& true_labels) {
  if (pred_labels.size() != true_labels.size()) throw InputError("confusion: length mismatch");
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < pred_labels.size(); ++i) {
    const int p = pred_labels[i];
    const int t = true_labels[i];
    if (p < 0 || p > 2 || t < 0 || t > 2) throw InputError("confusion: label outside {0,1,2}");
    ++m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

long total(const ConfusionMatrix& matrix) {
  long sum = 0;
  for (const auto& row : matrix) {
    for (long v : row) sum += v;
  }
  return sum;
}

double accuracy(const ConfusionMatrix& matrix) {
  const long n = total(matrix);
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(matrix[0][0] + matrix[1][1] + matrix[2][2]) / static_cast<double>(n);
}

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd out;
  out.count = values.size();
  if (values.empty()) {
    out.mean = out.sd = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

PairedTTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InputError("paired_t_test: length mismatch");
  if (a.size() < 2) throw InputError("paired_t_test: need at least two pairs");
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  PairedTTest out;
  out.dof = static_cast<int>(a.size()) - 1;
  out.mean_difference = mean;
  const double se = std::sqrt(ss / (n - 1.0) / n);
  if (se == 0.0) {
    out.t = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    out.p_value = mean == 0.0 ? 1.0 : 0.0;
    return out;
  }
  out.t = mean / se;
  const boost::math::students_t dist(static_cast<double>(out.dof));
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
  return out;
}

const char* to_string(Transition t) {
  switch (t) {
    case Transition::cn_to_mci: return "CN->MCI";
    case Transition::mci_to_ad: return "MCI->AD";
    case Transition::cn_to_ad: return "CN->AD";
    case Transition::mci_to_cn: return "MCI->CN";
    case Transition::ad_to_mci: return "AD->MCI";
    case Transition::ad_to_cn: return "AD->CN";
  }
  return "?";
}

namespace {

Transition classify(int from, int to) {
  if (from == 0 && to == 1) return Transition::cn_to_mci;
  if (from == 1 && to == 2) return Transition::mci_to_ad;
  if (from == 0 && to == 2) return Transition::cn_to_ad;
  if (from == 1 && to == 0) return Transition::mci_to_cn;
  if (from == 2 && to == 1) return Transition::ad_to_mci;
  return Transition::ad_to_cn;
}

}  // namespace

ConversionStats conversion_stats(const std::vector<PatientRecord>& patients) {
  ConversionStats stats;
  for (Transition t : kTransitions) stats.counts[t] = 0;
  std::array<std::vector<double>, 3> cn_mci;
  std::array<std::vector<double>, 3> mci_ad;

  for (const auto& p : patients) {
    for (std::size_t i = 1; i < p.visits.size(); ++i) {
      const Visit& prev = p.visits[i - 1];
      const Visit& cur = p.visits[i];
      if (!prev.target_present(kCsIndex) || !cur.target_present(kCsIndex)) continue;
      const int from = static_cast<int>(prev.targets(kCsIndex));
      const int to = static_cast<int>(cur.targets(kCsIndex));
      if (from == to) continue;
      ConversionEvent e;
      e.patient_id = p.patient_id;
      e.visit = cur.visit_index;
      e.from = from;
      e.to = to;
      const Transition kind = classify(from, to);
      ++stats.counts[kind];
      for (int s = 0; s < 3; ++s) {
        e.delta_present[static_cast<std::size_t>(s)] = prev.target_present(s) && cur.target_present(s);
        if (!e.delta_present[static_cast<std::size_t>(s)]) continue;
        e.delta[static_cast<std::size_t>(s)] = std::abs(cur.targets(s) - prev.targets(s));
        if (kind == Transition::cn_to_mci) cn_mci[static_cast<std::size_t>(s)].push_back(e.delta[static_cast<std::size_t>(s)]);
        if (kind == Transition::mci_to_ad) mci_ad[static_cast<std::size_t>(s)].push_back(e.delta[static_cast<std::size_t>(s)]);
      }
      stats.events.push_back(e);
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    stats.cn_to_mci_delta[s] = mean_sd(cn_mci[s]);
    stats.mci_to_ad_delta[s] = mean_sd(mci_ad[s]);
  }
  return stats;
}

PerPatientReport per_patient_report(const std::vector<PatientErrors>& patients) {
  PerPatientReport report;
  for (int k = 0; k < kNumTargets; ++k) {
    auto& rows = report.rows[static_cast<std::size_t>(k)];
    std::size_t improved = 0;
    for (const auto& p : patients) {
      const auto& base = p.baseline[static_cast<std::size_t>(k)];
      const auto& cand = p.candidate[static_cast<std::size_t>(k)];
      if (base.size() != cand.size()) {
        throw InputError("per_patient_report: patient " + p.patient_id +
                         " has mismatched prediction sets");
      }
      if (base.empty()) continue;
      const std::vector<double> zeros(base.size(), 0.0);
      PatientImprovementRow row;
      row.patient_id = p.patient_id;
      row.baseline_mae = mae(base, zeros);
      row.candidate_mae = mae(cand, zeros);
      row.improvement = row.baseline_mae - row.candidate_mae;
      if (row.improvement > 0.0) ++improved;
      rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return a.improvement > b.improvement;
    });
    report.fraction_improved[static_cast<std::size_t>(k)] =
        rows.empty() ? 0.0 : static_cast<double>(improved) / static_cast<double>(rows.size());
  }
  return report;
}

}  // namespace pgp
