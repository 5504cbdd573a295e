#pragma once

#include <Eigen/Core>

namespace pgp {

// Hyperparameters of the isotropic RBF kernel plus the observation noise.
// Values live in log-space; accessors exponentiate.
class KernelParams {
 public:
  KernelParams() = default;

  static KernelParams from_values(double signal_variance, double lengthscale,
                                  double noise_variance);
  static KernelParams from_log(const Eigen::Vector3d& log_values);

  double signal_variance() const;
  double lengthscale() const;
  double noise_variance() const;

  // (log signal variance, log lengthscale, log noise variance)
  const Eigen::Vector3d& log_values() const { return log_; }

  friend bool operator==(const KernelParams& a, const KernelParams& b) {
    return a.log_ == b.log_;
  }

 private:
  explicit KernelParams(const Eigen::Vector3d& log_values) : log_(log_values) {}

  Eigen::Vector3d log_ = Eigen::Vector3d::Zero();
};

double rbf(const Eigen::Ref<const Eigen::VectorXd>& a,
           const Eigen::Ref<const Eigen::VectorXd>& b, const KernelParams& params);

// Pairwise squared Euclidean distances between the rows of x and z.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z);

// Entry (i, j) is rbf(x.row(i), z.row(j)).
Eigen::MatrixXd gram(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                     const KernelParams& params);

// Cholesky factor of K + noise * I. When the plain factorization fails, a
// diagonal jitter of 1e-8 * mean(diag) is added and raised by a decade per
// retry up to 1e-4 * mean(diag); past that a NumericalError is thrown.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  CholeskyFactor(const Eigen::MatrixXd& k, double noise);

  Eigen::Index size() const { return lower_.rows(); }
  const Eigen::MatrixXd& lower() const { return lower_; }
  double jitter() const { return jitter_; }

  // (K + noise * I + jitter * I)^{-1} b
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  // L^{-1} b
  Eigen::MatrixXd solve_lower(const Eigen::MatrixXd& b) const;
  // (K + noise * I + jitter * I)^{-1}
  Eigen::MatrixXd inverse() const;
  double log_det() const;

 private:
  Eigen::MatrixXd lower_;
  double jitter_ = 0.0;
};

// (K + noise * I)^{-1} b through CholeskyFactor.
Eigen::MatrixXd solve_psd(const Eigen::MatrixXd& k, double noise, const Eigen::MatrixXd& b);

}  // namespace pgp
