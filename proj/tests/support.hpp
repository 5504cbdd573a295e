#pragma once

// Random instance generators and dense reference implementations shared by
// the unit tests and the acceptance runner. The references deliberately avoid
// the library's factorization code: they use LU inverses and determinants.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "pgp/kernel.hpp"
#include "pgp/population_gp.hpp"

namespace pgp::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double normal() { return normal_(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * normal();
    }
    return m;
  }

  KernelParams params() {
    return KernelParams::from_values(log_uniform(0.3, 3.0), log_uniform(0.5, 3.0),
                                     log_uniform(0.01, 0.5));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline double sq_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += (a(i) - b(i)) * (a(i) - b(i));
  return s;
}

// Kernel matrix from the closed form, entry by entry.
inline Eigen::MatrixXd dense_kernel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                                    double sf2, double ell) {
  Eigen::MatrixXd k(x.rows(), z.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.rows(); ++j) {
      k(i, j) = sf2 * std::exp(-sq_dist(x.row(i).transpose(), z.row(j).transpose()) / (2.0 * ell * ell));
    }
  }
  return k;
}

inline Eigen::MatrixXd dense_kernel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                                    const KernelParams& p) {
  return dense_kernel(x, z, p.signal_variance(), p.lengthscale());
}

// Negative log density of each target column under N(0, K + noise I), summed.
inline double dense_nlml(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelParams& p) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd c = dense_kernel(x, x, p);
  c.diagonal().array() += p.noise_variance();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(c);
  const Eigen::MatrixXd inv = lu.inverse();
  const double logdet = std::log(lu.determinant());
  double total = 0.0;
  for (Eigen::Index col = 0; col < y.cols(); ++col) {
    const Eigen::VectorXd v = y.col(col);
    total += 0.5 * v.dot(inv * v) + 0.5 * logdet + 0.5 * n * std::log(2.0 * std::numbers::pi);
  }
  return total;
}

struct DensePosterior {
  Eigen::MatrixXd mean;  // queries x outputs
  Eigen::VectorXd var;   // latent variance per query
};

// Gaussian conditioning of f(queries) on noisy observations y at x.
inline DensePosterior dense_posterior(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                      const Eigen::MatrixXd& queries, const KernelParams& p) {
  Eigen::MatrixXd c = dense_kernel(x, x, p);
  c.diagonal().array() += p.noise_variance();
  const Eigen::MatrixXd inv = c.fullPivLu().inverse();
  const Eigen::MatrixXd ks = dense_kernel(x, queries, p);
  DensePosterior out;
  out.mean = ks.transpose() * inv * y;
  out.var.resize(queries.rows());
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    out.var(q) = p.signal_variance() - ks.col(q).dot(inv * ks.col(q));
  }
  return out;
}

inline TrainingSet make_training_set(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  TrainingSet t;
  t.inputs = x;
  t.targets = y;
  for (Eigen::Index i = 0; i < x.rows(); ++i) t.pair_index.push_back({"s", static_cast<int>(i)});
  return t;
}

}  // namespace pgp::testing
