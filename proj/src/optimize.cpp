#include "pgp/optimize.hpp"

#include <cmath>
#include <limits>

#include "pgp/error.hpp"

namespace pgp {
namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const BfgsOptions& options) {
  if (options.lower.size() == 0) return x;
  return x.cwiseMax(options.lower).cwiseMin(options.upper);
}

// Gradient with components that push against an active bound removed.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                   const BfgsOptions& options) {
  Eigen::VectorXd pg = g;
  if (options.lower.size() == 0) return pg;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x(i) <= options.lower(i) && g(i) > 0.0) || (x(i) >= options.upper(i) && g(i) < 0.0)) {
      pg(i) = 0.0;
    }
  }
  return pg;
}

}  // namespace

BfgsResult minimize_bfgs(const Objective& objective, const Eigen::VectorXd& x0,
                         const BfgsOptions& options) {
  const Eigen::Index n = x0.size();
  if (options.lower.size() != 0 && (options.lower.size() != n || options.upper.size() != n)) {
    throw InputError("minimize_bfgs: bound dimension mismatch");
  }

  BfgsResult result;
  result.x = project(x0, options);
  result.gradient.resize(n);
  result.value = objective(result.x, &result.gradient);
  if (!std::isfinite(result.value)) throw NumericalError("minimize_bfgs: non-finite start");
  result.trace.push_back(result.value);

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);  // inverse Hessian estimate
  bool fresh = true;  // h is still a multiple of the identity
  Eigen::VectorXd grad_trial(n);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Eigen::VectorXd pg = projected_gradient(result.x, result.gradient, options);
    if (pg.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd direction = -(h * pg);
    if (direction.dot(pg) >= 0.0) {
      h.setIdentity();
      fresh = true;
      direction = -pg;
    }
    // Steepest-descent steps are capped at unit length; otherwise a large
    // gradient sends the first trial far out and wastes evaluations halving.
    if (fresh) {
      const double len = direction.lpNorm<Eigen::Infinity>();
      if (len > 1.0) direction /= len;
    }

    // Armijo backtracking on the projected path.
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_trial;
    double f_trial = 0.0;
    for (int k = 0; k < 60; ++k) {
      x_trial = project(result.x + step * direction, options);
      const Eigen::VectorXd s = x_trial - result.x;
      if (s.lpNorm<Eigen::Infinity>() == 0.0) break;
      try {
        f_trial = objective(x_trial, nullptr);
      } catch (const Error&) {
        f_trial = std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(f_trial) && f_trial <= result.value + 1e-4 * pg.dot(s)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    try {
      f_trial = objective(x_trial, &grad_trial);
    } catch (const Error&) {
      break;
    }

    const Eigen::VectorXd s = x_trial - result.x;
    const Eigen::VectorXd y = grad_trial - result.gradient;
    const double previous = result.value;
    result.x = x_trial;
    result.value = f_trial;
    result.gradient = grad_trial;
    result.iterations = iter + 1;
    result.trace.push_back(f_trial);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        h *= sy / y.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd i_n = Eigen::MatrixXd::Identity(n, n);
      h = (i_n - rho * s * y.transpose()) * h * (i_n - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }

    if (std::abs(previous - f_trial) <=
        options.relative_tolerance * std::max(1.0, std::abs(previous))) {
      result.converged =
          projected_gradient(result.x, result.gradient, options).lpNorm<Eigen::Infinity>() <
          std::sqrt(options.gradient_tolerance);
      break;
    }
  }
  return result;
}

}  // namespace pgp
