#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "pgp/kernel.hpp"

namespace pgp {

enum class Variant { standard, auto_regressive };

const char* to_string(Variant variant);
Variant variant_from_string(const std::string& name);

// Row r of a TrainingSet pairs visit `visit` of `patient_id` with the targets
// of the following visit.
struct PairIndex {
  std::string patient_id;
  int visit = 0;

  friend bool operator==(const PairIndex&, const PairIndex&) = default;
};

struct TrainingSet {
  Eigen::MatrixXd inputs;   // n x d
  Eigen::MatrixXd targets;  // n x m, one column per output
  std::vector<PairIndex> pair_index;
  Variant variant = Variant::standard;
  std::vector<std::string> warnings;

  Eigen::Index rows() const { return inputs.rows(); }
};

struct FitConfig {
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
};

struct RestartRecord {
  KernelParams initial;
  double initial_nlml = 0.0;
  KernelParams final_params;
  double final_nlml = 0.0;
  int iterations = 0;
  bool failed = false;
  std::string failure;
  std::vector<double> trace;
};

struct FitReport {
  std::vector<RestartRecord> restarts;
  int best_restart = -1;
  double nlml = 0.0;
  double median_distance = 0.0;
};

// Predictive distribution of the next visit's outputs. The variance is the
// single latent variance of the shared kernel, replicated per output.
struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

// Population GP: fixed kernel parameters, training data, and the cached
// factorization of K + noise * I.
class PopulationModel {
 public:
  PopulationModel() = default;
  PopulationModel(TrainingSet data, const KernelParams& params, FitReport report = {});

  const TrainingSet& training_set() const { return data_; }
  const KernelParams& params() const { return params_; }
  const CholeskyFactor& factor() const { return factor_; }
  // (K + noise * I)^{-1} Y, n x m
  const Eigen::MatrixXd& alpha() const { return alpha_; }
  Variant variant() const { return data_.variant; }
  Eigen::Index input_dim() const { return data_.inputs.cols(); }
  Eigen::Index output_dim() const { return data_.targets.cols(); }
  const FitReport& fit_report() const { return report_; }
  double jitter() const { return factor_.jitter(); }

 private:
  TrainingSet data_;
  KernelParams params_;
  FitReport report_;
  CholeskyFactor factor_;
  Eigen::MatrixXd alpha_;
};

struct NlmlEvaluation {
  double value = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();  // w.r.t. log parameters
  double jitter = 0.0;
};

// Negative log marginal likelihood summed over the target columns, all
// columns sharing one kernel.
double nlml(const KernelParams& params, const TrainingSet& data);
Eigen::Vector3d nlml_grad(const KernelParams& params, const TrainingSet& data);
NlmlEvaluation nlml_with_grad(const KernelParams& params, const TrainingSet& data);

// Median pairwise Euclidean distance between input rows (1 when degenerate).
double median_distance(const Eigen::MatrixXd& inputs);

PopulationModel fit(TrainingSet data, const FitConfig& config);

Prediction predict(const PopulationModel& model, const Eigen::Ref<const Eigen::VectorXd>& x_star);

// Clamps tiny negative variances from rounding; anything below -1e-10 is an error.
double clamp_variance(double variance);

}  // namespace pgp
