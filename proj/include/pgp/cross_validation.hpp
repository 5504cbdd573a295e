#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pgp/features.hpp"
#include "pgp/ingestion.hpp"
#include "pgp/metrics.hpp"
#include "pgp/population_gp.hpp"

namespace pgp {

struct FoldPlan {
  int k = 10;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;
  std::vector<std::vector<std::string>> folds;  // patient ids per fold, id-ordered
};

// Seeded shuffle of the id-sorted patients, then round-robin assignment.
FoldPlan make_folds(std::vector<std::string> patient_ids, int k, std::uint64_t seed);

enum class ModelKind { gp, gp_ar, pgp, pgp_ar };
inline constexpr std::array<ModelKind, 4> kAllModels = {ModelKind::gp, ModelKind::gp_ar,
                                                        ModelKind::pgp, ModelKind::pgp_ar};

const char* to_string(ModelKind kind);     // gp, gp-ar, pgp, pgp-ar
const char* display_name(ModelKind kind);  // GP, GP(AR), pGP, pGP(AR)
ModelKind model_kind_from_string(const std::string& name);
Variant variant_of(ModelKind kind);
bool is_personalized(ModelKind kind);

struct CvConfig {
  std::vector<ModelKind> models = {kAllModels.begin(), kAllModels.end()};
  int folds = 10;
  std::uint64_t seed = 0;
  PipelineConfig pipeline;
  bool ar_include_cs = true;
  int restarts = 5;
  int max_iterations = 200;
  int jobs = 1;
  bool keep_models = false;  // retain fitted pipelines and models in the result
};

// One next-visit prediction in clinical units.
struct PredictionPoint {
  std::string patient_id;
  int visit = 0;  // visit index of the input
  int fold = 0;
  Eigen::Vector4d pred = Eigen::Vector4d::Zero();
  Eigen::Vector4d truth = Eigen::Vector4d::Zero();
  std::array<bool, kNumTargets> observed{};  // truth recorded (not filled)
  double variance = 0.0;                     // model units
};

struct FitSummary {
  int fold = 0;
  Variant variant = Variant::standard;
  KernelParams params;
  double nlml = 0.0;
  double jitter = 0.0;
  Eigen::Index rows = 0;
  Eigen::Index input_dim = 0;
  Eigen::Index pca_components = 0;
};

struct FoldResult {
  int fold = 0;
  std::vector<std::string> training_ids;
  std::vector<std::string> test_ids;
  FeaturePipeline pipeline;
  std::vector<FitSummary> fits;
  std::map<ModelKind, std::vector<PredictionPoint>> points;
  std::map<Variant, PopulationModel> models;
  std::vector<std::string> warnings;
};

// Fits every transform and model on the training patients of `fold` only and
// predicts the held-out patients.
FoldResult evaluate_fold(const std::vector<PatientRecord>& records, const FoldPlan& plan, int fold,
                         const CvConfig& config);

struct FoldMetrics {
  std::array<double, kNumTargets> mae{};
  std::array<double, kNumTargets> icc{};
  std::array<bool, kNumTargets> icc_defined{};
  double accuracy = 0.0;
  std::size_t predictions = 0;
};

FoldMetrics fold_metrics(const std::vector<PredictionPoint>& points);

struct ModelResult {
  ModelKind kind = ModelKind::gp;
  std::vector<PredictionPoint> points;  // fold order, then patient, then visit
  std::vector<FoldMetrics> per_fold;
  std::array<MeanSd, kNumTargets> mae;
  std::array<MeanSd, kNumTargets> icc;  // over folds where ICC is defined
  MeanSd accuracy;
  ConfusionMatrix confusion{};
};

struct Comparison {
  ModelKind candidate = ModelKind::pgp_ar;
  ModelKind baseline = ModelKind::gp_ar;
  std::array<PairedTTest, kNumTargets> mae_test;  // candidate - baseline per-fold MAE
  PairedTTest accuracy_test;
  PerPatientReport per_patient;
};

struct CvResult {
  CvConfig config;
  FoldPlan plan;
  std::vector<ModelResult> models;
  std::vector<Comparison> comparisons;
  std::vector<FitSummary> fits;
  std::vector<std::string> warnings;
  std::vector<FoldResult> folds;  // only with CvConfig::keep_models

  const ModelResult& model(ModelKind kind) const;
};

std::vector<PatientErrors> patient_errors(const std::vector<PredictionPoint>& baseline,
                                          const std::vector<PredictionPoint>& candidate);

// Full patient-independent cross-validation of the requested models.
CvResult run_cross_validation(const std::vector<PatientRecord>& records, const CvConfig& config);

}  // namespace pgp
