#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "pgp/error.hpp"
#include "pgp/population_gp.hpp"
#include "support.hpp"

using namespace pgp;
using pgp::testing::Gen;
using pgp::testing::make_training_set;

TEST_CASE("nlml of a single zero observation") {
  Eigen::MatrixXd x(1, 1), y(1, 1);
  x << 0.0;
  y << 0.0;
  const double v = nlml(KernelParams::from_values(1.0, 1.0, 1.0), make_training_set(x, y));
  CHECK(v == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi * 2.0)).epsilon(1e-14));
  CHECK(v == doctest::Approx(1.2655).epsilon(1e-4));
}

TEST_CASE("nlml equals the dense multivariate normal density") {
  Gen gen(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd x = gen.matrix(8, 3);
    const Eigen::MatrixXd y = gen.matrix(8, 4);
    const auto p = gen.params();
    CHECK(std::abs(nlml(p, make_training_set(x, y)) - pgp::testing::dense_nlml(x, y, p)) < 1e-8);
  }
}

TEST_CASE("scaling the targets up raises the data-fit term") {
  Gen gen(22);
  const Eigen::MatrixXd x = gen.matrix(10, 2);
  const Eigen::MatrixXd y = gen.matrix(10, 1);
  const auto p = gen.params();
  CHECK(nlml(p, make_training_set(x, 2.0 * y)) > nlml(p, make_training_set(x, y)));
}

TEST_CASE("nlml rejects empty data and mismatched rows") {
  const auto p = KernelParams::from_values(1.0, 1.0, 1.0);
  CHECK_THROWS_AS(nlml(p, TrainingSet{}), InputError);
  TrainingSet t;
  t.inputs = Eigen::MatrixXd::Zero(3, 1);
  t.targets = Eigen::MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(nlml(p, t), InputError);
}

TEST_CASE("analytic gradient matches central differences") {
  Gen gen(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd x = gen.matrix(gen.integer(5, 15), gen.integer(1, 4));
    const Eigen::MatrixXd y = gen.matrix(x.rows(), 4);
    const auto t = make_training_set(x, y);
    const auto p = gen.params();
    const Eigen::Vector3d g = nlml_grad(p, t);
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector3d up = p.log_values(), dn = p.log_values();
      up(i) += 1e-5;
      dn(i) -= 1e-5;
      const double fd = (nlml(KernelParams::from_log(up), t) - nlml(KernelParams::from_log(dn), t)) / 2e-5;
      CHECK(std::abs(g(i) - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("log-det gradient in the diagonal case") {
  // Far-apart points make K = sf2 * I; with y = 0 only the log det remains and
  // d/d log sf2 of (1/2) log det = (1/2) n sf2 / (sf2 + sn2) per output.
  const int n = 5;
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = 1e3 * i;
  const Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, 2);
  const double sf2 = 1.7, sn2 = 0.4;
  const Eigen::Vector3d g = nlml_grad(KernelParams::from_values(sf2, 1.0, sn2), make_training_set(x, y));
  CHECK(g(0) == doctest::Approx(2 * 0.5 * n * sf2 / (sf2 + sn2)).epsilon(1e-12));
}

TEST_CASE("fit recovers a known lengthscale") {
  Gen gen(24);
  const auto truth = KernelParams::from_values(1.0, 2.0, 0.1);
  const Eigen::MatrixXd x = gen.matrix(100, 1, 4.0);
  Eigen::MatrixXd k = pgp::testing::dense_kernel(x, x, truth);
  k.diagonal().array() += truth.noise_variance() + 1e-10;
  const Eigen::MatrixXd l = k.llt().matrixL();
  const Eigen::MatrixXd y = l * gen.matrix(100, 4);
  FitConfig config;
  config.seed = 5;
  const PopulationModel model = fit(make_training_set(x, y), config);
  CHECK(model.params().lengthscale() == doctest::Approx(2.0).epsilon(0.3));

  // Stationarity at the optimum.
  const Eigen::Vector3d g = nlml_grad(model.params(), model.training_set());
  CHECK(g.norm() < 1e-3);
}

TEST_CASE("fit never ends above any restart's starting point and is deterministic") {
  Gen gen(25);
  const Eigen::MatrixXd x = gen.matrix(30, 3);
  const Eigen::MatrixXd y = gen.matrix(30, 4);
  FitConfig config;
  config.seed = 77;
  const PopulationModel a = fit(make_training_set(x, y), config);
  const PopulationModel b = fit(make_training_set(x, y), config);
  CHECK(a.params() == b.params());
  CHECK(a.fit_report().nlml == b.fit_report().nlml);
  REQUIRE(a.fit_report().restarts.size() == 5);
  for (const auto& r : a.fit_report().restarts) {
    REQUIRE_FALSE(r.failed);
    CHECK(a.fit_report().nlml <= r.initial_nlml);
    CHECK(r.final_nlml <= r.initial_nlml);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
  }
  CHECK(nlml(a.params(), a.training_set()) == doctest::Approx(a.fit_report().nlml).epsilon(1e-12));
}

TEST_CASE("fit preconditions") {
  Eigen::MatrixXd x(1, 1), y(1, 1);
  CHECK_THROWS_AS(fit(make_training_set(x, y), FitConfig{}), InputError);
}

TEST_CASE("alpha reproduces the targets through the gram system") {
  Gen gen(26);
  const Eigen::MatrixXd x = gen.matrix(25, 3);
  const Eigen::MatrixXd y = gen.matrix(25, 4);
  const auto p = gen.params();
  const PopulationModel m(make_training_set(x, y), p);
  Eigen::MatrixXd c = gram(x, x, p);
  c.diagonal().array() += p.noise_variance();
  CHECK((c * m.alpha() - y).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("predict hand-computed 1x1 system") {
  Eigen::MatrixXd x(1, 1), y(1, 1);
  x << 0.0;
  y << 1.0;
  const PopulationModel m(make_training_set(x, y), KernelParams::from_values(1.0, 1.0, 1.0));
  const Prediction p = predict(m, Eigen::VectorXd::Zero(1));
  CHECK(p.mean(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.variance(0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("predict interpolates with tiny noise and reverts far away") {
  Gen gen(27);
  const Eigen::MatrixXd x = gen.matrix(10, 2, 3.0);
  const Eigen::MatrixXd y = gen.matrix(10, 4);
  const PopulationModel m(make_training_set(x, y), KernelParams::from_values(1.0, 0.5, 1e-9));
  const Prediction at = predict(m, x.row(3).transpose());
  CHECK((at.mean - y.row(3).transpose()).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(at.variance(0) < 1e-4);

  const Prediction far = predict(m, Eigen::VectorXd::Constant(2, 1e3));
  CHECK(far.mean.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(far.variance(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(predict(m, Eigen::VectorXd::Zero(3)), InputError);
}

TEST_CASE("predict matches dense conditioning and never exceeds the prior variance") {
  Gen gen(28);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::MatrixXd x = gen.matrix(gen.integer(1, 20), gen.integer(1, 5));
    const Eigen::MatrixXd y = gen.matrix(x.rows(), 4);
    const auto p = gen.params();
    const PopulationModel m(make_training_set(x, y), p);
    const Eigen::MatrixXd q = gen.matrix(3, x.cols());
    const auto oracle = pgp::testing::dense_posterior(x, y, q, p);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const Prediction pr = predict(m, q.row(i).transpose());
      CHECK((pr.mean - oracle.mean.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(std::abs(pr.variance(0) - oracle.var(i)) < 1e-8);
      CHECK(pr.variance.maxCoeff() <= p.signal_variance());
      CHECK(pr.variance.minCoeff() >= 0.0);
      CHECK(pr.variance.size() == 4);
      CHECK(pr.variance.maxCoeff() == pr.variance.minCoeff());
    }
  }
}

TEST_CASE("zeroed auto-regressive columns reduce to the standard model") {
  Gen gen(29);
  const Eigen::MatrixXd x = gen.matrix(12, 3);
  const Eigen::MatrixXd y = gen.matrix(12, 4);
  Eigen::MatrixXd x_ar(12, 7);
  x_ar << x, Eigen::MatrixXd::Zero(12, 4);
  const auto p = gen.params();
  TrainingSet ar = make_training_set(x_ar, y);
  ar.variant = Variant::auto_regressive;
  const PopulationModel a(ar, p);
  const PopulationModel s(make_training_set(x, y), p);
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd q = gen.matrix(3, 1);
    Eigen::VectorXd q_ar(7);
    q_ar << q, Eigen::VectorXd::Zero(4);
    const Prediction pa = predict(a, q_ar);
    const Prediction ps = predict(s, q);
    CHECK((pa.mean - ps.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(pa.variance(0) - ps.variance(0)) < 1e-12);
  }
}

TEST_CASE("variance clamp") {
  CHECK(clamp_variance(0.25) == 0.25);
  CHECK(clamp_variance(-5e-11) == 0.0);
  CHECK_THROWS_AS(clamp_variance(-1e-6), NumericalError);
}

TEST_CASE("variant names") {
  CHECK(variant_from_string(to_string(Variant::standard)) == Variant::standard);
  CHECK(variant_from_string(to_string(Variant::auto_regressive)) == Variant::auto_regressive);
  CHECK_THROWS_AS(variant_from_string("ar"), InputError);
}
