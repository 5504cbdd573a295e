#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "pgp/features.hpp"
#include "pgp/population_gp.hpp"

namespace pgp {

inline constexpr int kModelFormatVersion = 1;

nlohmann::ordered_json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::ordered_json model_to_json(const PopulationModel& model);
PopulationModel model_from_json(const nlohmann::json& j);

nlohmann::ordered_json pipeline_to_json(const FeaturePipeline& pipeline);
FeaturePipeline pipeline_from_json(const nlohmann::json& j);

// One file holding the fitted transforms and the population model.
void save_bundle(const std::filesystem::path& path, const FeaturePipeline& pipeline,
                 const PopulationModel& model);
std::pair<FeaturePipeline, PopulationModel> load_bundle(const std::filesystem::path& path);

}  // namespace pgp
