#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "pgp/population_gp.hpp"

namespace pgp {

// Visits of one target patient observed so far, as (input, next-visit target)
// pairs. Append-only.
class PatientHistory {
 public:
  PatientHistory(std::string patient_id, Eigen::Index input_dim, Eigen::Index output_dim);

  void append(int visit, const Eigen::Ref<const Eigen::VectorXd>& input,
              const Eigen::Ref<const Eigen::VectorXd>& target);

  const std::string& patient_id() const { return patient_id_; }
  Eigen::Index size() const { return inputs_.rows(); }
  bool empty() const { return size() == 0; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::MatrixXd& targets() const { return targets_; }
  const std::vector<int>& visits() const { return visits_; }

 private:
  std::string patient_id_;
  Eigen::MatrixXd inputs_;
  Eigen::MatrixXd targets_;
  std::vector<int> visits_;
};

// Population posterior over the patient's observed inputs.
struct ConditionalPrior {
  Eigen::MatrixXd mu;   // t x m
  Eigen::MatrixXd cov;  // t x t
};

ConditionalPrior conditional_prior(const PopulationModel& model, const PatientHistory& history);

// Population prediction corrected by the patient's residuals against the
// conditional prior. With an empty history this is exactly predict().
Prediction adapt_predict(const PopulationModel& model, const PatientHistory& history,
                         const Eigen::Ref<const Eigen::VectorXd>& x_star);

// One patient's prepared pair sequence: row t holds the model input built
// from visit t and the model-unit targets of visit t + 1.
struct PatientPairs {
  std::string patient_id;
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  std::vector<int> visits;
};

struct PatientRun {
  std::string patient_id;
  std::vector<Prediction> population;
  std::vector<Prediction> personalized;
  std::optional<std::string> warning;
};

// Sequential personalization: prediction t uses the pairs before t as history
// and pair t's input as the query. Targets of pair t are never consulted for
// prediction t.
PatientRun run_patient(const PopulationModel& model, const PatientPairs& patient);

}  // namespace pgp
