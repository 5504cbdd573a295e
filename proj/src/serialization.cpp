#include "pgp/serialization.hpp"

#include <fstream>

#include "pgp/error.hpp"

namespace pgp {
namespace {

nlohmann::ordered_json row_to_json(const Eigen::RowVectorXd& v) {
  auto a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::RowVectorXd row_from_json(const nlohmann::json& j) {
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

nlohmann::ordered_json scaler_to_json(const Scaler& s) {
  nlohmann::ordered_json j;
  j["mean"] = row_to_json(s.mean);
  j["std"] = row_to_json(s.std);
  j["constant"] = s.constant;
  return j;
}

Scaler scaler_from_json(const nlohmann::json& j) {
  Scaler s;
  s.mean = row_from_json(j.at("mean"));
  s.std = row_from_json(j.at("std"));
  s.constant = j.at("constant").get<std::vector<bool>>();
  return s;
}

}  // namespace

nlohmann::ordered_json to_json(const Eigen::MatrixXd& m) {
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  auto data = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw InputError("matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  return m;
}

nlohmann::ordered_json model_to_json(const PopulationModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "pgp-population-model";
  j["version"] = kModelFormatVersion;
  j["variant"] = to_string(model.variant());
  const auto& lv = model.params().log_values();
  j["log_params"] = {lv(0), lv(1), lv(2)};
  j["jitter"] = model.jitter();
  j["fit_nlml"] = model.fit_report().nlml;
  j["inputs"] = to_json(model.training_set().inputs);
  j["targets"] = to_json(model.training_set().targets);
  auto idx = nlohmann::ordered_json::array();
  for (const auto& p : model.training_set().pair_index) idx.push_back({p.patient_id, p.visit});
  j["pair_index"] = std::move(idx);
  return j;
}

PopulationModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "pgp-population-model") {
      throw InputError("not a population model document");
    }
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw InputError("unsupported model format version");
    }
    TrainingSet data;
    data.variant = variant_from_string(j.at("variant").get<std::string>());
    data.inputs = matrix_from_json(j.at("inputs"));
    data.targets = matrix_from_json(j.at("targets"));
    for (const auto& p : j.at("pair_index")) {
      data.pair_index.push_back({p.at(0).get<std::string>(), p.at(1).get<int>()});
    }
    const auto& lp = j.at("log_params");
    const auto params =
        KernelParams::from_log(Eigen::Vector3d(lp.at(0).get<double>(), lp.at(1).get<double>(),
                                               lp.at(2).get<double>()));
    FitReport report;
    report.nlml = j.at("fit_nlml").get<double>();
    return PopulationModel(std::move(data), params, std::move(report));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model document: ") + e.what());
  }
}

nlohmann::ordered_json pipeline_to_json(const FeaturePipeline& p) {
  nlohmann::ordered_json j;
  j["pca_ratio"] = p.config().pca_ratio;
  j["standardize_targets"] = p.config().standardize_targets;
  j["feature_fallback"] = row_to_json(p.feature_fallback().transpose());
  j["target_fallback"] = row_to_json(p.target_fallback().transpose());
  j["input_scaler"] = scaler_to_json(p.input_scaler());
  j["target_scaler"] = scaler_to_json(p.target_scaler());
  nlohmann::ordered_json pca;
  pca["mean"] = row_to_json(p.pca().mean);
  pca["components"] = to_json(p.pca().components);
  pca["explained_variance"] = row_to_json(p.pca().explained_variance.transpose());
  pca["retained"] = p.pca().retained;
  j["pca"] = std::move(pca);
  return j;
}

FeaturePipeline pipeline_from_json(const nlohmann::json& j) {
  try {
    PipelineConfig config;
    config.pca_ratio = j.at("pca_ratio").get<double>();
    config.standardize_targets = j.at("standardize_targets").get<bool>();
    PcaProjection pca;
    const auto& pj = j.at("pca");
    pca.mean = row_from_json(pj.at("mean"));
    pca.components = matrix_from_json(pj.at("components"));
    pca.explained_variance = row_from_json(pj.at("explained_variance")).transpose();
    pca.retained = pj.at("retained").get<Eigen::Index>();
    const Eigen::RowVectorXd tf = row_from_json(j.at("target_fallback"));
    if (tf.size() != kNumTargets) throw InputError("target fallback must have 4 entries");
    return FeaturePipeline::from_parts(config, row_from_json(j.at("feature_fallback")).transpose(),
                                       tf.transpose(), scaler_from_json(j.at("input_scaler")),
                                       std::move(pca), scaler_from_json(j.at("target_scaler")));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed pipeline document: ") + e.what());
  }
}

void save_bundle(const std::filesystem::path& path, const FeaturePipeline& pipeline,
                 const PopulationModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "pgp-bundle";
  j["version"] = kModelFormatVersion;
  j["pipeline"] = pipeline_to_json(pipeline);
  j["model"] = model_to_json(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump() << '\n';
}

std::pair<FeaturePipeline, PopulationModel> load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "pgp-bundle") throw InputError(path.string() + " is not a model bundle");
  return {pipeline_from_json(j.at("pipeline")), model_from_json(j.at("model"))};
}

}  // namespace pgp
