#include "pgp/kernel.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

#include "pgp/error.hpp"

namespace pgp {

KernelParams KernelParams::from_values(double signal_variance, double lengthscale,
                                       double noise_variance) {
  if (!(signal_variance > 0.0) || !(lengthscale > 0.0) || !(noise_variance > 0.0) ||
      !std::isfinite(signal_variance) || !std::isfinite(lengthscale) ||
      !std::isfinite(noise_variance)) {
    throw InputError("kernel parameters must be finite and strictly positive");
  }
  return KernelParams(Eigen::Vector3d(std::log(signal_variance), std::log(lengthscale),
                                      std::log(noise_variance)));
}

KernelParams KernelParams::from_log(const Eigen::Vector3d& log_values) {
  if (!log_values.allFinite()) throw InputError("log kernel parameters must be finite");
  return KernelParams(log_values);
}

double KernelParams::signal_variance() const { return std::exp(log_(0)); }
double KernelParams::lengthscale() const { return std::exp(log_(1)); }
double KernelParams::noise_variance() const { return std::exp(log_(2)); }

double rbf(const Eigen::Ref<const Eigen::VectorXd>& a,
           const Eigen::Ref<const Eigen::VectorXd>& b, const KernelParams& params) {
  if (a.size() != b.size()) {
    throw InputError("rbf: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  const double ell = params.lengthscale();
  return params.signal_variance() * std::exp(-(a - b).squaredNorm() / (2.0 * ell * ell));
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) {
  if (x.cols() != z.cols()) {
    throw InputError("squared_distances: column mismatch (" + std::to_string(x.cols()) +
                     " vs " + std::to_string(z.cols()) + ")");
  }
  Eigen::MatrixXd d2(x.rows(), z.rows());
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      d2(i, j) = (x.row(i) - z.row(j)).squaredNorm();
    }
  }
  return d2;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                     const KernelParams& params) {
  const double ell = params.lengthscale();
  const double scale = -1.0 / (2.0 * ell * ell);
  return (squared_distances(x, z).array() * scale).exp().matrix() * params.signal_variance();
}

CholeskyFactor::CholeskyFactor(const Eigen::MatrixXd& k, double noise) {
  if (k.rows() != k.cols()) throw InputError("CholeskyFactor: matrix is not square");
  const Eigen::Index n = k.rows();
  double mean_diag = n > 0 ? k.diagonal().mean() + noise : 1.0;
  if (!(mean_diag > 0.0) || !std::isfinite(mean_diag)) mean_diag = 1.0;

  // Factor in place; only a failed attempt pays for a fresh copy.
  lower_ = k;
  double jitter = 0.0;
  double relative = 1e-8;
  while (true) {
    lower_.diagonal().array() += noise + jitter;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(lower_);
    if (llt.info() == Eigen::Success && lower_.diagonal().allFinite()) {
      lower_.triangularView<Eigen::StrictlyUpper>().setZero();
      jitter_ = jitter;
      return;
    }
    if (relative > 1e-4 * 1.5) {
      throw NumericalError("Cholesky factorization failed with jitter " +
                               std::to_string(jitter),
                           jitter);
    }
    jitter = relative * mean_diag;
    relative *= 10.0;
    lower_ = k;
  }
}

Eigen::MatrixXd CholeskyFactor::solve_lower(const Eigen::MatrixXd& b) const {
  if (b.rows() != lower_.rows()) throw InputError("CholeskyFactor: row mismatch");
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

Eigen::MatrixXd CholeskyFactor::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd y = solve_lower(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

namespace {

// In-place inverse of a lower-triangular block by recursive halving, so the
// bulk of the work runs through matrix products.
void invert_lower(Eigen::Ref<Eigen::MatrixXd> l) {
  const Eigen::Index n = l.rows();
  if (n <= 64) {
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    l.triangularView<Eigen::Lower>().solveInPlace(id);
    l = id.triangularView<Eigen::Lower>();
    return;
  }
  const Eigen::Index h = n / 2;
  auto l11 = l.topLeftCorner(h, h);
  auto l21 = l.bottomLeftCorner(n - h, h);
  auto l22 = l.bottomRightCorner(n - h, n - h);
  invert_lower(l11);
  invert_lower(l22);
  const Eigen::MatrixXd t = l21 * l11.triangularView<Eigen::Lower>();
  l21.noalias() = -(l22.triangularView<Eigen::Lower>() * t);
}

}  // namespace

// L^{-T} L^{-1} as a triangular times full product, which beats a rank update here.
Eigen::MatrixXd CholeskyFactor::inverse() const {
  Eigen::MatrixXd l_inv = lower_;
  invert_lower(l_inv);
  Eigen::MatrixXd a(size(), size());
  a.noalias() = l_inv.transpose().triangularView<Eigen::Upper>() * l_inv;
  return a;
}

double CholeskyFactor::log_det() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

Eigen::MatrixXd solve_psd(const Eigen::MatrixXd& k, double noise, const Eigen::MatrixXd& b) {
  return CholeskyFactor(k, noise).solve(b);
}

}  // namespace pgp
