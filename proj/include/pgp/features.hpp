#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "pgp/ingestion.hpp"
#include "pgp/personalized_gp.hpp"
#include "pgp/population_gp.hpp"

namespace pgp {

// Per-column z-normalization learned from training rows.
struct Scaler {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;  // constant columns get 1
  std::vector<bool> constant;

  Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& rows) const;
};

Scaler fit_scaler(const Eigen::MatrixXd& rows);
// Statistics over the cells where mask is true; never-observed columns get
// mean 0, std 1 and are flagged constant.
Scaler fit_scaler(const Eigen::MatrixXd& rows,
                  const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask);
Eigen::MatrixXd apply_scaler(const Scaler& scaler, const Eigen::MatrixXd& rows);

struct PcaProjection {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd components;          // k x d, orthonormal rows
  Eigen::VectorXd explained_variance;  // every eigenvalue, descending, clipped at 0
  Eigen::Index retained = 0;

  double total_variance() const { return explained_variance.sum(); }
  double retained_variance() const { return explained_variance.head(retained).sum(); }
  double retained_ratio() const;
};

// Keeps the fewest leading components whose cumulative explained variance
// reaches `ratio`. The largest-magnitude entry of each component is positive.
PcaProjection fit_pca(const Eigen::MatrixXd& rows, double ratio = 0.95);
Eigen::MatrixXd apply_pca(const PcaProjection& pca, const Eigen::MatrixXd& rows);

// A patient's visits in model space: row t is visit t.
struct PreparedPatient {
  std::string patient_id;
  std::vector<int> visits;
  Eigen::MatrixXd features;  // T x d'
  Eigen::MatrixXd targets;   // T x 4, model units
  Eigen::Array<bool, Eigen::Dynamic, kNumTargets> target_observed;  // before filling
};

struct PairOptions {
  Variant variant = Variant::auto_regressive;
  bool ar_include_cs = true;  // append CS with the three cognitive scores
};

Eigen::Index ar_target_columns(const PairOptions& options);

// x_t -> y_{t+1} (standard) or [x_t, y_t] -> y_{t+1} (auto-regressive).
PatientPairs make_patient_pairs(const PreparedPatient& patient, const PairOptions& options);

// Rows ordered by patient id then visit; never spans two patients.
TrainingSet build_pairs(const std::vector<PreparedPatient>& patients, const PairOptions& options);
// Convenience over filled records in raw units.
TrainingSet build_pairs(const std::vector<PatientRecord>& patients, const PairOptions& options);

PreparedPatient prepare_raw(const PatientRecord& filled);

struct PipelineConfig {
  double pca_ratio = 0.95;
  bool standardize_targets = true;
};

// Everything fitted on the training fold: fill fallbacks, input scaler, PCA
// and the target scaler. Test patients only pass through prepare().
class FeaturePipeline {
 public:
  FeaturePipeline() = default;

  static FeaturePipeline fit(const std::vector<PatientRecord>& training,
                             const PipelineConfig& config);

  PreparedPatient prepare(const PatientRecord& raw) const;

  // Model units back to clinical units for one output column.
  double target_to_clinical(double value, int column) const;
  double variance_to_clinical(double variance, int column) const;

  const Eigen::VectorXd& feature_fallback() const { return feature_fallback_; }
  const Eigen::Vector4d& target_fallback() const { return target_fallback_; }
  const Scaler& input_scaler() const { return input_scaler_; }
  const PcaProjection& pca() const { return pca_; }
  const Scaler& target_scaler() const { return target_scaler_; }
  const PipelineConfig& config() const { return config_; }

  static FeaturePipeline from_parts(PipelineConfig config, Eigen::VectorXd feature_fallback,
                                    Eigen::Vector4d target_fallback, Scaler input_scaler,
                                    PcaProjection pca, Scaler target_scaler);

 private:
  PipelineConfig config_;
  Eigen::VectorXd feature_fallback_;
  Eigen::Vector4d target_fallback_ = Eigen::Vector4d::Zero();
  Scaler input_scaler_;
  PcaProjection pca_;
  Scaler target_scaler_;
};

}  // namespace pgp
