#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "pgp/error.hpp"
#include "pgp/kernel.hpp"
#include "support.hpp"

using namespace pgp;
using pgp::testing::Gen;

TEST_CASE("kernel params reject non-positive values and round trip through log space") {
  CHECK_THROWS_AS(KernelParams::from_values(0.0, 1.0, 1.0), InputError);
  CHECK_THROWS_AS(KernelParams::from_values(1.0, -1.0, 1.0), InputError);
  CHECK_THROWS_AS(KernelParams::from_values(1.0, 1.0, std::nan("")), InputError);
  const auto p = KernelParams::from_values(2.0, 0.5, 0.1);
  CHECK(p.signal_variance() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p.lengthscale() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.noise_variance() == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(KernelParams::from_log(p.log_values()) == p);
}

TEST_CASE("rbf closed-form values") {
  const auto p = KernelParams::from_values(1.0, 1.0, 1.0);
  Eigen::VectorXd x(3);
  x << 0.3, -1.2, 4.0;
  CHECK(rbf(x, x, p) == 1.0);

  Eigen::VectorXd a(1), b(1);
  a << 0.0;
  b << std::sqrt(2.0 * std::log(2.0));
  CHECK(rbf(a, b, p) == doctest::Approx(0.5).epsilon(1e-14));

  Eigen::VectorXd c(2);
  CHECK_THROWS_AS(rbf(a, c, p), InputError);
}

TEST_CASE("rbf is symmetric, bounded and isotropic") {
  Gen gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = gen.integer(1, 6);
    const auto p = gen.params();
    const Eigen::VectorXd a = gen.matrix(d, 1);
    const Eigen::VectorXd b = gen.matrix(d, 1);
    const double k = rbf(a, b, p);
    CHECK(k == rbf(b, a, p));
    CHECK(k > 0.0);
    CHECK(k <= p.signal_variance());

    const Eigen::VectorXd shift = gen.matrix(d, 1, 5.0);
    CHECK(rbf(a + shift, b + shift, p) == doctest::Approx(k).epsilon(1e-12));

    const Eigen::MatrixXd q = gen.matrix(d, d).householderQr().householderQ();
    CHECK(rbf(q * a, q * b, p) == doctest::Approx(k).epsilon(1e-12));
  }
}

TEST_CASE("gram matches entrywise rbf and is PSD") {
  Gen gen(12);
  const auto p = gen.params();
  const Eigen::MatrixXd one = gen.matrix(1, 3);
  const Eigen::MatrixXd g1 = gram(one, one, p);
  CHECK(g1.rows() == 1);
  CHECK(g1(0, 0) == doctest::Approx(p.signal_variance()).epsilon(1e-15));

  const Eigen::MatrixXd x = gen.matrix(20, 4);
  const Eigen::MatrixXd z = gen.matrix(7, 4);
  const Eigen::MatrixXd kxz = gram(x, z, p);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.rows(); ++j) {
      CHECK(kxz(i, j) == doctest::Approx(rbf(x.row(i).transpose(), z.row(j).transpose(), p)).epsilon(1e-13));
    }
  }

  const Eigen::MatrixXd x5 = x.topRows(5);
  const Eigen::MatrixXd k5 = gram(x5, x5, p);
  CHECK((k5 - k5.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * k5.cwiseAbs().maxCoeff());

  const Eigen::MatrixXd kxx = gram(x, x, p);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kxx);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10);

  CHECK_THROWS_AS(gram(x, gen.matrix(3, 2), p), InputError);
}

TEST_CASE("solve_psd examples") {
  Eigen::MatrixXd k(1, 1), b(1, 1);
  k << 1.0;
  b << 1.0;
  CHECK(solve_psd(k, 1.0, b)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
  CHECK((solve_psd(id, 0.0, id) - id).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("solve_psd agrees with a dense inverse and recovers the right-hand side") {
  Gen gen(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd a = gen.matrix(6, 6);
    const Eigen::MatrixXd k = a * a.transpose();
    const double noise = gen.log_uniform(1e-3, 1.0);
    const Eigen::MatrixXd b = gen.matrix(6, 3);
    const Eigen::MatrixXd x = solve_psd(k, noise, b);
    const Eigen::MatrixXd c = k + noise * Eigen::MatrixXd::Identity(6, 6);
    const Eigen::MatrixXd oracle = c.fullPivLu().inverse() * b;
    CHECK((x - oracle).norm() <= 1e-8 * oracle.norm());
    CHECK((c * x - b).norm() <= 1e-6 * b.norm());
  }
}

TEST_CASE("cholesky factor inverse and log determinant") {
  Gen gen(14);
  const Eigen::MatrixXd a = gen.matrix(150, 150);
  const Eigen::MatrixXd k = a * a.transpose() / 150.0;
  const CholeskyFactor f(k, 0.3);
  const Eigen::MatrixXd c = k + 0.3 * Eigen::MatrixXd::Identity(150, 150);
  const Eigen::MatrixXd oracle = c.fullPivLu().inverse();
  CHECK((f.inverse() - oracle).cwiseAbs().maxCoeff() < 1e-9 * oracle.cwiseAbs().maxCoeff());
  const Eigen::MatrixXd inv = f.inverse();
  CHECK((inv - inv.transpose()).cwiseAbs().maxCoeff() < 1e-12 * oracle.cwiseAbs().maxCoeff());
  CHECK(f.log_det() == doctest::Approx(std::log(c.fullPivLu().determinant())).epsilon(1e-10));
  CHECK(f.jitter() == 0.0);
}

TEST_CASE("jitter ladder rescues a singular gram and fails on hopeless input") {
  // Duplicated points make K exactly singular; zero noise forces jitter.
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 0, 0, 1, 1, 1, 1;
  const auto p = KernelParams::from_values(1.0, 1.0, 1.0);
  const CholeskyFactor f(gram(x, x, p), 0.0);
  CHECK(f.jitter() > 0.0);
  CHECK(f.jitter() <= 1e-4 * 1.0 + 1e-18);

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 0.0, 0.0, -1.0;
  try {
    CholeskyFactor g(bad, 0.0);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.last_jitter() > 0.0);
  }
}
