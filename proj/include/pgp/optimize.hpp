#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace pgp {

// Objective returning f(x). When the second argument is non-null the gradient
// is written into it; line-search trials pass null and skip that work.
// Throwing from the objective marks the point infeasible for the line search.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct BfgsOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double relative_tolerance = 1e-12;
  Eigen::VectorXd lower;  // box; empty means unbounded
  Eigen::VectorXd upper;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after each accepted step, starting with f(x0)
};

// Quasi-Newton minimization with an Armijo backtracking line search, kept
// inside the box by projection. Accepted steps never increase the objective.
BfgsResult minimize_bfgs(const Objective& objective, const Eigen::VectorXd& x0,
                         const BfgsOptions& options);

}  // namespace pgp
