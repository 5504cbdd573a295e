#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "pgp/cross_validation.hpp"
#include "pgp/metrics.hpp"

namespace pgp {

inline constexpr int kMetricsSchemaVersion = 1;

nlohmann::ordered_json metrics_document(const CvResult& result, const ConversionStats& conversions);

// Human-readable comparison table rendered from a metrics document.
std::string render_table(const nlohmann::ordered_json& metrics);

// metrics.json, metrics.txt, confusion_*.csv, per_patient_*.csv,
// predictions_*.csv and conversions.csv under `dir`.
void write_reports(const std::filesystem::path& dir, const CvResult& result,
                   const ConversionStats& conversions);

}  // namespace pgp
