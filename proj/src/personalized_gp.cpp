#include "pgp/personalized_gp.hpp"

#include <utility>

#include "pgp/error.hpp"

namespace pgp {
namespace {

void check_dims(const PopulationModel& model, Eigen::Index input_dim, Eigen::Index output_dim) {
  if (input_dim != model.input_dim() || output_dim != model.output_dim()) {
    throw InputError("patient data dimensions do not match the model");
  }
}

// Posterior cross covariance between the rows of a and b under the source GP.
Eigen::MatrixXd posterior_cov(const PopulationModel& model, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd& xs = model.training_set().inputs;
  const Eigen::MatrixXd wa = model.factor().solve_lower(gram(xs, a, model.params()));
  const Eigen::MatrixXd wb = model.factor().solve_lower(gram(xs, b, model.params()));
  return gram(a, b, model.params()) - wa.transpose() * wb;
}

// Condition the population prediction on the patient's visits, everything
// already expressed under the source posterior.
Prediction correct(const PopulationModel& model, Prediction population,
                   const Eigen::MatrixXd& prior_mu, const Eigen::MatrixXd& prior_cov,
                   const Eigen::MatrixXd& history_targets, const Eigen::VectorXd& cross) {
  const CholeskyFactor factor(prior_cov, model.params().noise_variance());
  const Eigen::VectorXd gain = factor.solve(cross);
  population.mean += (history_targets - prior_mu).transpose() * gain;
  const double var = clamp_variance(population.variance(0) - cross.dot(gain));
  population.variance.setConstant(var);
  return population;
}

}  // namespace

PatientHistory::PatientHistory(std::string patient_id, Eigen::Index input_dim,
                               Eigen::Index output_dim)
    : patient_id_(std::move(patient_id)), inputs_(0, input_dim), targets_(0, output_dim) {}

void PatientHistory::append(int visit, const Eigen::Ref<const Eigen::VectorXd>& input,
                            const Eigen::Ref<const Eigen::VectorXd>& target) {
  if (input.size() != inputs_.cols() || target.size() != targets_.cols()) {
    throw InputError("PatientHistory: dimension mismatch");
  }
  if (!visits_.empty() && visit <= visits_.back()) {
    throw InputError("PatientHistory: visits must be strictly increasing");
  }
  const Eigen::Index t = inputs_.rows();
  inputs_.conservativeResize(t + 1, Eigen::NoChange);
  targets_.conservativeResize(t + 1, Eigen::NoChange);
  inputs_.row(t) = input.transpose();
  targets_.row(t) = target.transpose();
  visits_.push_back(visit);
}

ConditionalPrior conditional_prior(const PopulationModel& model, const PatientHistory& history) {
  if (history.empty()) throw InputError("conditional_prior: empty history");
  check_dims(model, history.inputs().cols(), history.targets().cols());

  const Eigen::MatrixXd& xs = model.training_set().inputs;
  const Eigen::MatrixXd& xp = history.inputs();
  const Eigen::MatrixXd k_sp = gram(xs, xp, model.params());
  const Eigen::MatrixXd w = model.factor().solve_lower(k_sp);

  ConditionalPrior prior;
  prior.mu = k_sp.transpose() * model.alpha();
  prior.cov = gram(xp, xp, model.params()) - w.transpose() * w;
  prior.cov = 0.5 * (prior.cov + prior.cov.transpose());
  return prior;
}

Prediction adapt_predict(const PopulationModel& model, const PatientHistory& history,
                         const Eigen::Ref<const Eigen::VectorXd>& x_star) {
  Prediction population = predict(model, x_star);
  if (history.empty()) return population;
  check_dims(model, history.inputs().cols(), history.targets().cols());

  const ConditionalPrior prior = conditional_prior(model, history);
  const Eigen::VectorXd cross =
      posterior_cov(model, history.inputs(), Eigen::MatrixXd(x_star.transpose())).col(0);
  return correct(model, std::move(population), prior.mu, prior.cov, history.targets(), cross);
}

PatientRun run_patient(const PopulationModel& model, const PatientPairs& patient) {
  PatientRun run;
  run.patient_id = patient.patient_id;
  const Eigen::Index pairs = patient.inputs.rows();
  if (pairs < 1) {
    run.warning = "patient " + patient.patient_id + " has fewer than 2 visits; skipped";
    return run;
  }
  check_dims(model, patient.inputs.cols(), patient.targets.cols());
  if (patient.targets.rows() != pairs) throw InputError("run_patient: ragged patient pairs");

  // Source-posterior quantities over every pair input at once; step t reads
  // only the leading blocks, so later pairs never influence earlier steps.
  const Eigen::MatrixXd k_sp = gram(model.training_set().inputs, patient.inputs, model.params());
  const Eigen::MatrixXd w = model.factor().solve_lower(k_sp);
  Eigen::MatrixXd post_cov = gram(patient.inputs, patient.inputs, model.params()) - w.transpose() * w;
  post_cov = 0.5 * (post_cov + post_cov.transpose());
  const Eigen::MatrixXd post_mu = k_sp.transpose() * model.alpha();

  for (Eigen::Index t = 0; t < pairs; ++t) {
    Prediction population = predict(model, patient.inputs.row(t).transpose());
    run.population.push_back(population);
    if (t == 0) {
      run.personalized.push_back(std::move(population));
      continue;
    }
    run.personalized.push_back(correct(model, std::move(population), post_mu.topRows(t),
                                       post_cov.topLeftCorner(t, t), patient.targets.topRows(t),
                                       post_cov.col(t).head(t)));
  }
  return run;
}

}  // namespace pgp
