#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pgp {

inline constexpr int kNumTargets = 4;
inline constexpr std::array<const char*, kNumTargets> kTargetNames = {"MMSE", "ADAS13", "CDRSB",
                                                                      "CS"};
inline constexpr std::array<double, kNumTargets> kTargetMax = {30.0, 85.0, 18.0, 2.0};
inline constexpr int kCsIndex = 3;
inline constexpr double kSentinel = -99999999.0;
inline constexpr int kMonthsPerVisit = 6;

enum class Modality { demographics, genetics, cognitive, csf, mri, dti };

const char* to_string(Modality modality);
Modality modality_from_string(const std::string& name);

struct FeatureColumn {
  std::string name;
  Modality modality = Modality::demographics;
};

// Feature columns of the visit CSV, in file order.
struct Schema {
  std::vector<FeatureColumn> features;

  std::size_t feature_dim() const { return features.size(); }
  std::string header_line() const;

  static Schema load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct Visit {
  int visit_index = 0;  // month / 6
  int month = 0;
  Eigen::VectorXd features;
  Eigen::Array<bool, Eigen::Dynamic, 1> feature_present;
  Eigen::Vector4d targets = Eigen::Vector4d::Zero();
  Eigen::Array<bool, kNumTargets, 1> target_present = Eigen::Array<bool, kNumTargets, 1>::Constant(false);
};

struct PatientRecord {
  std::string patient_id;
  std::vector<Visit> visits;  // sorted by month, unique months
  double missing_fraction = 0.0;

  std::size_t visit_count() const { return visits.size(); }
  Eigen::Index feature_dim() const { return visits.empty() ? 0 : visits.front().features.size(); }
};

// Numeric-aware patient id ordering: integer ids compare by value, anything
// else lexicographically after them.
bool patient_id_less(const std::string& a, const std::string& b);

// Fraction of absent feature cells across all the patient's visits.
double compute_missing_fraction(const PatientRecord& record);

std::vector<PatientRecord> parse_csv(std::istream& in, const Schema& schema,
                                     std::vector<std::string>* warnings = nullptr);
std::vector<PatientRecord> parse_csv(const std::filesystem::path& path, const Schema& schema,
                                     std::vector<std::string>* warnings = nullptr);

// Missing cells are written as the sentinel value.
void write_csv(std::ostream& out, const std::vector<PatientRecord>& records, const Schema& schema);
void write_csv(const std::filesystem::path& path, const std::vector<PatientRecord>& records,
               const Schema& schema);

// Carries the most recent earlier observation forward; cells with no earlier
// observation take the fallback. Never looks at later visits.
PatientRecord forward_fill(const PatientRecord& record, const Eigen::VectorXd& feature_fallback,
                           const Eigen::Vector4d& target_fallback);

struct SelectionReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t dropped_visits = 0;   // failed only the visit-count rule
  std::size_t dropped_missing = 0;  // failed only the missingness rule
  std::size_t dropped_both = 0;
  int min_visits = 11;
  double max_missing = 0.825;
};

struct CohortSelection {
  std::vector<PatientRecord> records;
  SelectionReport report;
};

// Keeps patients with at least min_visits visits and missing_fraction <= max_missing.
CohortSelection select_cohort(const std::vector<PatientRecord>& records, int min_visits = 11,
                              double max_missing = 0.825);

struct VisitHistogram {
  std::map<int, std::size_t> counts;  // total visits -> patients
  bool defined = false;
  double mean = 0.0;
  double sd = 0.0;  // population
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

VisitHistogram visit_histogram(const std::vector<PatientRecord>& records);

}  // namespace pgp
