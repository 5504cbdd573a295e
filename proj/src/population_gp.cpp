#include "pgp/population_gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <utility>

#include "pgp/error.hpp"
#include "pgp/optimize.hpp"

namespace pgp {
namespace {

void check_training_set(const TrainingSet& data) {
  if (data.inputs.rows() == 0) throw InputError("training set is empty");
  if (data.targets.rows() != data.inputs.rows()) {
    throw InputError("training set inputs and targets have different row counts");
  }
  if (data.targets.cols() == 0) throw InputError("training set has no target columns");
}

// Factorization state at one parameter vector, enough for the value and,
// on demand, the gradient.
struct NlmlState {
  NlmlState(const KernelParams& p, const Eigen::MatrixXd& d2, const Eigen::MatrixXd& targets)
      : params(p),
        k((d2.array() * (-0.5 / (p.lengthscale() * p.lengthscale()))).exp().matrix() * p.signal_variance()),
        factor(k, p.noise_variance()),
        alpha(factor.solve(targets)) {
    const double n = static_cast<double>(targets.rows());
    const double m = static_cast<double>(targets.cols());
    value = 0.5 * (targets.array() * alpha.array()).sum() + 0.5 * m * factor.log_det() +
            0.5 * m * n * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(value)) throw NumericalError("NLML is not finite");
  }

  // dNLML/dtheta = 1/2 tr((m A - alpha alpha^T) dK/dtheta), A = (K + noise I)^{-1}
  // Only the lower triangle of the symmetric W is used; off-diagonal terms
  // count twice in the elementwise sums.
  Eigen::Vector3d gradient(const Eigen::MatrixXd& d2) const {
    Eigen::MatrixXd w = factor.inverse();
    w *= static_cast<double>(alpha.cols());
    w.selfadjointView<Eigen::Lower>().rankUpdate(alpha, -1.0);

    double s_k = 0.0;
    double s_kd = 0.0;
    const Eigen::Index size = k.rows();
    for (Eigen::Index j = 0; j < size; ++j) {
      s_k += w(j, j) * k(j, j);
      for (Eigen::Index i = j + 1; i < size; ++i) {
        const double wk = 2.0 * w(i, j) * k(i, j);
        s_k += wk;
        s_kd += wk * d2(i, j);
      }
    }
    const double ell2 = params.lengthscale() * params.lengthscale();
    return {0.5 * s_k, 0.5 * s_kd / ell2, 0.5 * params.noise_variance() * w.trace()};
  }

  KernelParams params;
  Eigen::MatrixXd k;
  CholeskyFactor factor;
  Eigen::MatrixXd alpha;
  double value = 0.0;
};

NlmlEvaluation evaluate(const KernelParams& params, const Eigen::MatrixXd& d2,
                        const Eigen::MatrixXd& targets, bool with_gradient) {
  const NlmlState state(params, d2, targets);
  NlmlEvaluation out;
  out.value = state.value;
  out.jitter = state.factor.jitter();
  if (with_gradient) out.gradient = state.gradient(d2);
  return out;
}

}  // namespace

const char* to_string(Variant variant) {
  return variant == Variant::standard ? "standard" : "auto-regressive";
}

Variant variant_from_string(const std::string& name) {
  if (name == "standard") return Variant::standard;
  if (name == "auto-regressive") return Variant::auto_regressive;
  throw InputError("unknown variant '" + name + "'");
}

PopulationModel::PopulationModel(TrainingSet data, const KernelParams& params, FitReport report)
    : data_(std::move(data)), params_(params), report_(std::move(report)) {
  check_training_set(data_);
  factor_ = CholeskyFactor(gram(data_.inputs, data_.inputs, params_), params_.noise_variance());
  alpha_ = factor_.solve(data_.targets);
}

double nlml(const KernelParams& params, const TrainingSet& data) {
  check_training_set(data);
  return evaluate(params, squared_distances(data.inputs, data.inputs), data.targets, false).value;
}

NlmlEvaluation nlml_with_grad(const KernelParams& params, const TrainingSet& data) {
  check_training_set(data);
  return evaluate(params, squared_distances(data.inputs, data.inputs), data.targets, true);
}

Eigen::Vector3d nlml_grad(const KernelParams& params, const TrainingSet& data) {
  return nlml_with_grad(params, data).gradient;
}

double median_distance(const Eigen::MatrixXd& inputs) {
  std::vector<double> distances;
  const Eigen::Index n = inputs.rows();
  distances.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      distances.push_back((inputs.row(i) - inputs.row(j)).norm());
    }
  }
  if (distances.empty()) return 1.0;
  auto mid = distances.begin() + static_cast<std::ptrdiff_t>(distances.size() / 2);
  std::nth_element(distances.begin(), mid, distances.end());
  return *mid > 0.0 ? *mid : 1.0;
}

PopulationModel fit(TrainingSet data, const FitConfig& config) {
  check_training_set(data);
  if (data.rows() < 2) throw InputError("fit needs at least two training rows");
  if (config.restarts < 1) throw InputError("fit needs at least one restart");

  const Eigen::MatrixXd d2 = squared_distances(data.inputs, data.inputs);
  FitReport report;
  report.median_distance = median_distance(data.inputs);
  const double md = report.median_distance;

  BfgsOptions options;
  options.max_iterations = config.max_iterations;
  options.gradient_tolerance = config.gradient_tolerance;
  options.lower = Eigen::Vector3d(std::log(1e-6), std::log(1e-3 * md), std::log(1e-6));
  options.upper = Eigen::Vector3d(std::log(1e6), std::log(1e3 * md), std::log(1e3));

  // The optimizer asks for the gradient at a point it has just evaluated, so
  // the last factorization is kept around.
  std::optional<NlmlState> last;
  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (!last || last->params.log_values() != x) {
      last.reset();
      last.emplace(KernelParams::from_log(x), d2, data.targets);
    }
    if (g) *g = last->gradient(d2);
    return last->value;
  };

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto log_uniform = [&](double lo, double hi) {
    return std::log(lo) + unit(rng) * (std::log(hi) - std::log(lo));
  };

  for (int r = 0; r < config.restarts; ++r) {
    RestartRecord record;
    const Eigen::Vector3d x0(log_uniform(0.1, 10.0), log_uniform(0.1 * md, 10.0 * md),
                             log_uniform(1e-3, 1.0));
    record.initial = KernelParams::from_log(x0);
    try {
      const BfgsResult res = minimize_bfgs(objective, x0, options);
      record.initial_nlml = res.trace.front();
      record.final_params = KernelParams::from_log(res.x);
      record.final_nlml = res.value;
      record.iterations = res.iterations;
      record.trace = res.trace;
      if (report.best_restart < 0 || record.final_nlml < report.nlml) {
        report.best_restart = r;
        report.nlml = record.final_nlml;
      }
    } catch (const Error& e) {
      record.failed = true;
      record.failure = e.what();
    }
    report.restarts.push_back(std::move(record));
  }
  if (report.best_restart < 0) throw FitError("all optimizer restarts failed numerically");

  const KernelParams best = report.restarts[static_cast<std::size_t>(report.best_restart)].final_params;
  return PopulationModel(std::move(data), best, std::move(report));
}

double clamp_variance(double variance) {
  if (variance >= 0.0) return variance;
  if (variance >= -1e-10) return 0.0;
  throw NumericalError("predictive variance is negative (" + std::to_string(variance) + ")");
}

Prediction predict(const PopulationModel& model, const Eigen::Ref<const Eigen::VectorXd>& x_star) {
  if (x_star.size() != model.input_dim()) {
    throw InputError("predict: query has dimension " + std::to_string(x_star.size()) +
                     ", model expects " + std::to_string(model.input_dim()));
  }
  const Eigen::MatrixXd k_star = gram(model.training_set().inputs, x_star.transpose(), model.params());
  const Eigen::VectorXd v = model.factor().solve_lower(k_star);
  const double var = clamp_variance(model.params().signal_variance() - v.squaredNorm());

  Prediction p;
  p.mean = model.alpha().transpose() * k_star.col(0);
  p.variance = Eigen::VectorXd::Constant(model.output_dim(), var);
  return p;
}

}  // namespace pgp
