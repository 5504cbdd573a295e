#include "pgp/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "pgp/error.hpp"
#include "text_util.hpp"

namespace pgp {
namespace {

constexpr std::array<const char*, 6> kModalityNames = {"demographics", "genetics", "cognitive",
                                                       "csf",          "mri",      "dti"};

std::optional<long long> as_integer(const std::string& s) {
  if (s.empty()) return std::nullopt;
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string unquote(std::string_view s) {
  s = text::trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

// Missing cells: empty or the sentinel.
std::optional<double> parse_cell(std::string_view cell, long line, const std::string& column) {
  cell = text::trim(cell);
  if (cell.empty()) return std::nullopt;
  const auto value = text::parse_double(cell);
  if (!value || !std::isfinite(*value)) {
    throw ParseError("column " + column + ": cannot parse '" + std::string(cell) + "'", line);
  }
  if (*value == kSentinel) return std::nullopt;
  return value;
}

}  // namespace

const char* to_string(Modality modality) { return kModalityNames[static_cast<std::size_t>(modality)]; }

Modality modality_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kModalityNames.size(); ++i) {
    if (name == kModalityNames[i]) return static_cast<Modality>(i);
  }
  throw InputError("unknown modality '" + name + "'");
}

std::string Schema::header_line() const {
  std::string line = "patient_id,month";
  for (const auto& f : features) line += "," + f.name;
  for (const char* t : kTargetNames) line += std::string(",") + t;
  return line;
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open schema file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("schema file " + path.string() + ": " + e.what());
  }
  Schema schema;
  try {
    for (const auto& f : doc.at("features")) {
      schema.features.push_back(
          {f.at("name").get<std::string>(), modality_from_string(f.at("modality").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError("schema file " + path.string() + ": " + e.what());
  }
  if (schema.features.empty()) throw InputError("schema file declares no features");
  return schema;
}

void Schema::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json doc;
  doc["schema_version"] = 1;
  doc["features"] = nlohmann::ordered_json::array();
  for (const auto& f : features) {
    doc["features"].push_back({{"name", f.name}, {"modality", to_string(f.modality)}});
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write schema file " + path.string());
  out << doc.dump(2) << '\n';
}

bool patient_id_less(const std::string& a, const std::string& b) {
  const auto ia = as_integer(a);
  const auto ib = as_integer(b);
  if (ia && ib) return *ia != *ib ? *ia < *ib : a < b;
  if (ia != ib && (ia || ib)) return static_cast<bool>(ia);
  return a < b;
}

double compute_missing_fraction(const PatientRecord& record) {
  std::size_t cells = 0;
  std::size_t missing = 0;
  for (const auto& v : record.visits) {
    cells += static_cast<std::size_t>(v.feature_present.size());
    missing += static_cast<std::size_t>((!v.feature_present).count());
  }
  return cells == 0 ? 0.0 : static_cast<double>(missing) / static_cast<double>(cells);
}

std::vector<PatientRecord> parse_csv(std::istream& in, const Schema& schema,
                                     std::vector<std::string>* warnings) {
  const std::size_t d = schema.feature_dim();
  const std::size_t expected = 2 + d + kNumTargets;

  std::string line;
  long line_no = 1;
  if (!std::getline(in, line)) throw ParseError("missing header row", line_no);
  if (text::trim(line) != schema.header_line()) {
    throw ParseError("header does not match schema; expected '" + schema.header_line() + "'",
                     line_no);
  }

  std::vector<PatientRecord> records;
  std::unordered_map<std::string, std::size_t> index;
  std::unordered_map<std::string, std::vector<long>> lines;

  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(line, ',');
    if (cells.size() != expected) {
      throw ParseError("expected " + std::to_string(expected) + " fields, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    const std::string id = unquote(cells[0]);
    if (id.empty()) throw ParseError("empty patient_id", line_no);

    const auto month_value = text::parse_double(cells[1]);
    if (!month_value || !std::isfinite(*month_value) || *month_value < 0.0) {
      throw ParseError("invalid month '" + std::string(cells[1]) + "'", line_no);
    }
    Visit visit;
    const double grid = std::round(*month_value / kMonthsPerVisit);
    visit.month = static_cast<int>(grid) * kMonthsPerVisit;
    visit.visit_index = static_cast<int>(grid);
    if (static_cast<double>(visit.month) != *month_value && warnings) {
      warnings->push_back("line " + std::to_string(line_no) + ": month " +
                          std::string(text::trim(cells[1])) + " snapped to " +
                          std::to_string(visit.month));
    }

    visit.features.resize(static_cast<Eigen::Index>(d));
    visit.feature_present.resize(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) {
      const auto v = parse_cell(cells[2 + j], line_no, schema.features[j].name);
      visit.feature_present(static_cast<Eigen::Index>(j)) = v.has_value();
      visit.features(static_cast<Eigen::Index>(j)) = v.value_or(kSentinel);
    }
    for (int k = 0; k < kNumTargets; ++k) {
      const auto v = parse_cell(cells[2 + d + static_cast<std::size_t>(k)], line_no, kTargetNames[k]);
      visit.target_present(k) = v.has_value();
      visit.targets(k) = v.value_or(kSentinel);
      if (!v) continue;
      if (*v < 0.0 || *v > kTargetMax[static_cast<std::size_t>(k)]) {
        throw ValidationError(std::string(kTargetNames[k]) + " value " + text::format_double(*v) +
                                  " outside [0, " + text::format_double(kTargetMax[k]) + "]",
                              line_no);
      }
      if (k == kCsIndex && *v != std::round(*v)) {
        throw ValidationError("CS must be one of 0, 1, 2", line_no);
      }
    }

    auto [it, inserted] = index.try_emplace(id, records.size());
    if (inserted) records.push_back(PatientRecord{id, {}, 0.0});
    records[it->second].visits.push_back(std::move(visit));
    lines[id].push_back(line_no);
  }

  for (auto& r : records) {
    std::vector<std::size_t> order(r.visits.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return r.visits[a].month < r.visits[b].month;
    });
    std::vector<Visit> sorted;
    sorted.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i > 0 && r.visits[order[i]].month == r.visits[order[i - 1]].month) {
        throw ValidationError("patient " + r.patient_id + " has two visits at month " +
                                  std::to_string(r.visits[order[i]].month),
                              lines[r.patient_id][order[i]]);
      }
      sorted.push_back(std::move(r.visits[order[i]]));
    }
    r.visits = std::move(sorted);
    r.missing_fraction = compute_missing_fraction(r);
  }
  std::sort(records.begin(), records.end(), [](const PatientRecord& a, const PatientRecord& b) {
    return patient_id_less(a.patient_id, b.patient_id);
  });
  return records;
}

std::vector<PatientRecord> parse_csv(const std::filesystem::path& path, const Schema& schema,
                                     std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return parse_csv(in, schema, warnings);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

void write_csv(std::ostream& out, const std::vector<PatientRecord>& records, const Schema& schema) {
  const std::string sentinel = "-99999999";
  out << schema.header_line() << '\n';
  for (const auto& r : records) {
    for (const auto& v : r.visits) {
      if (v.features.size() != static_cast<Eigen::Index>(schema.feature_dim())) {
        throw InputError("write_csv: record " + r.patient_id + " does not match schema");
      }
      out << r.patient_id << ',' << v.month;
      for (Eigen::Index j = 0; j < v.features.size(); ++j) {
        out << ',' << (v.feature_present(j) ? text::format_double(v.features(j)) : sentinel);
      }
      for (int k = 0; k < kNumTargets; ++k) {
        out << ',' << (v.target_present(k) ? text::format_double(v.targets(k)) : sentinel);
      }
      out << '\n';
    }
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<PatientRecord>& records,
               const Schema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_csv(out, records, schema);
}

PatientRecord forward_fill(const PatientRecord& record, const Eigen::VectorXd& feature_fallback,
                           const Eigen::Vector4d& target_fallback) {
  PatientRecord out = record;
  const Eigen::Index d = record.feature_dim();
  if (!record.visits.empty() && feature_fallback.size() != d) {
    throw InputError("forward_fill: fallback has wrong dimension");
  }
  Eigen::VectorXd last_feature = feature_fallback;
  Eigen::Vector4d last_target = target_fallback;
  for (auto& v : out.visits) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (v.feature_present(j)) {
        last_feature(j) = v.features(j);
      } else {
        v.features(j) = last_feature(j);
        v.feature_present(j) = true;
      }
    }
    for (int k = 0; k < kNumTargets; ++k) {
      if (v.target_present(k)) {
        last_target(k) = v.targets(k);
      } else {
        v.targets(k) = last_target(k);
        v.target_present(k) = true;
      }
    }
  }
  return out;
}

CohortSelection select_cohort(const std::vector<PatientRecord>& records, int min_visits,
                              double max_missing) {
  CohortSelection out;
  out.report.input = records.size();
  out.report.min_visits = min_visits;
  out.report.max_missing = max_missing;
  for (const auto& r : records) {
    const bool enough_visits = static_cast<int>(r.visit_count()) >= min_visits;
    const bool dense_enough = r.missing_fraction <= max_missing;
    if (enough_visits && dense_enough) {
      out.records.push_back(r);
    } else if (!enough_visits && !dense_enough) {
      ++out.report.dropped_both;
    } else if (!enough_visits) {
      ++out.report.dropped_visits;
    } else {
      ++out.report.dropped_missing;
    }
  }
  out.report.kept = out.records.size();
  return out;
}

namespace {

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

VisitHistogram visit_histogram(const std::vector<PatientRecord>& records) {
  VisitHistogram h;
  if (records.empty()) return h;
  std::vector<double> counts;
  counts.reserve(records.size());
  for (const auto& r : records) {
    ++h.counts[static_cast<int>(r.visit_count())];
    counts.push_back(static_cast<double>(r.visit_count()));
  }
  std::sort(counts.begin(), counts.end());
  const double n = static_cast<double>(counts.size());
  double sum = 0.0;
  for (double c : counts) sum += c;
  h.mean = sum / n;
  double ss = 0.0;
  for (double c : counts) ss += (c - h.mean) * (c - h.mean);
  h.sd = std::sqrt(ss / n);
  h.q1 = quantile(counts, 0.25);
  h.median = quantile(counts, 0.5);
  h.q3 = quantile(counts, 0.75);
  h.defined = true;
  return h;
}

}  // namespace pgp
