#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "pgp/error.hpp"
#include "pgp/features.hpp"
#include "pgp/synth.hpp"
#include "records.hpp"
#include "support.hpp"

using namespace pgp;
using pgp::testing::Gen;
using pgp::testing::kMiss;
using pgp::testing::make_record;

TEST_CASE("scaler standardizes its own rows and inverts exactly") {
  Gen gen(51);
  Eigen::MatrixXd x = gen.matrix(40, 5, 3.0);
  x.col(1).array() += 100.0;
  x.col(3).setConstant(7.0);
  const Scaler s = fit_scaler(x);
  CHECK(s.constant[3]);
  CHECK_FALSE(s.constant[0]);
  CHECK((s.std.array() > 0.0).all());
  const Eigen::MatrixXd z = apply_scaler(s, x);
  for (Eigen::Index j = 0; j < 5; ++j) {
    CHECK(std::abs(z.col(j).mean()) < 1e-10);
    if (j == 3) {
      CHECK(z.col(j).cwiseAbs().maxCoeff() == 0.0);
    } else {
      const double var = (z.col(j).array() - z.col(j).mean()).square().mean();
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }
  CHECK((s.inverse_transform(z) - x).cwiseAbs().maxCoeff() < 1e-12 * x.cwiseAbs().maxCoeff());
  CHECK_THROWS_AS(fit_scaler(Eigen::MatrixXd(0, 3)), InputError);
}

TEST_CASE("masked scaler only sees observed cells") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 10, 3, -99999999, -99999999, 30, 5, 20;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(4, 2);
  mask << true, true, true, false, false, true, true, true;
  const Scaler s = fit_scaler(x, mask);
  CHECK(s.mean(0) == doctest::Approx(3.0));
  CHECK(s.mean(1) == doctest::Approx(20.0));
  CHECK(s.std(0) == doctest::Approx(std::sqrt(8.0 / 3.0)));
}

TEST_CASE("pca on an exact plane keeps two components") {
  Gen gen(52);
  const Eigen::MatrixXd basis = gen.matrix(2, 10);
  const Eigen::MatrixXd x = gen.matrix(200, 2) * basis;
  const PcaProjection p = fit_pca(x, 0.95);
  CHECK(p.retained == 2);
  CHECK(p.retained_ratio() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pca retained count agrees with an SVD spectrum on an isotropic cloud") {
  Gen gen(53);
  const Eigen::MatrixXd x = gen.matrix(10000, 10);
  const PcaProjection p = fit_pca(x, 0.95);
  CHECK(p.retained >= 9);

  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::VectorXd sv = centered.jacobiSvd().singularValues();
  const Eigen::VectorXd ev = sv.array().square() / static_cast<double>(x.rows() - 1);
  Eigen::Index k = 0;
  double cum = 0.0;
  while (k < ev.size() && cum < 0.95 * ev.sum()) cum += ev(k++);
  CHECK(p.retained == k);
  CHECK((p.explained_variance - ev).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pca components are orthonormal, signed and minimal") {
  Gen gen(54);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = gen.integer(2, 8);
    Eigen::MatrixXd x = gen.matrix(60, d) * gen.matrix(d, d);
    const double ratio = gen.uniform(0.5, 0.99);
    const PcaProjection p = fit_pca(x, ratio);
    const Eigen::MatrixXd gram = p.components * p.components.transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(p.retained, p.retained)).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index c = 0; c < p.retained; ++c) {
      Eigen::Index arg = 0;
      p.components.row(c).cwiseAbs().maxCoeff(&arg);
      CHECK(p.components(c, arg) > 0.0);
    }
    const double total = p.total_variance();
    CHECK(p.retained_variance() >= ratio * total * (1.0 - 1e-12));
    if (p.retained > 1) CHECK(p.explained_variance.head(p.retained - 1).sum() < ratio * total);

    // Reconstruction error identity.
    const Eigen::MatrixXd centered = x.rowwise() - p.mean;
    const Eigen::MatrixXd recon = apply_pca(p, x) * p.components;
    const double err = (centered - recon).squaredNorm() / static_cast<double>(x.rows() - 1);
    CHECK(std::abs(err - (total - p.retained_variance())) < 1e-8 * std::max(1.0, total));

    // Inner products inside the retained subspace survive projection.
    const Eigen::MatrixXd proj = apply_pca(p, x);
    const Eigen::MatrixXd inside = recon;
    CHECK(std::abs(proj.row(0).dot(proj.row(1)) - inside.row(0).dot(inside.row(1))) < 1e-8 * std::max(1.0, inside.squaredNorm()));
  }
}

TEST_CASE("pca preconditions") {
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Zero(1, 3)), InputError);
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Random(5, 3), 0.0), InputError);
}

TEST_CASE("build_pairs standard and auto-regressive layouts") {
  const auto a = make_record("2", {{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}},
                             {{{30, 1, 0, 0}}, {{29, 2, 1, 1}}, {{28, 3, 2, 2}}});
  const auto b = make_record("10", {{7.0, 8.0}, {9.0, 10.0}}, {{{27, 4, 3, 1}}, {{26, 5, 4, 2}}});
  const auto c = make_record("1", {{0.0, 0.0}}, {{{25, 6, 5, 2}}});

  PairOptions std_opt;
  std_opt.variant = Variant::standard;
  const TrainingSet s = build_pairs(std::vector<PatientRecord>{b, a, c}, std_opt);
  REQUIRE(s.rows() == 3);
  CHECK(s.inputs.cols() == 2);
  CHECK(s.pair_index[0] == PairIndex{"2", 0});
  CHECK(s.pair_index[1] == PairIndex{"2", 1});
  CHECK(s.pair_index[2] == PairIndex{"10", 0});
  CHECK(s.inputs.row(1) == Eigen::RowVector2d(3.0, 4.0));
  CHECK(s.targets.row(1) == Eigen::RowVector4d(28, 3, 2, 2));
  REQUIRE(s.warnings.size() == 1);
  CHECK(s.warnings[0].find("patient 1") != std::string::npos);

  const TrainingSet ar = build_pairs(std::vector<PatientRecord>{a, b, c}, PairOptions{});
  CHECK(ar.variant == Variant::auto_regressive);
  CHECK(ar.inputs.cols() == 2 + 4);
  Eigen::RowVectorXd expected(6);
  expected << 3.0, 4.0, 29, 2, 1, 1;
  CHECK(ar.inputs.row(1) == expected);
  CHECK(ar.targets.row(1) == Eigen::RowVector4d(28, 3, 2, 2));

  PairOptions no_cs;
  no_cs.ar_include_cs = false;
  CHECK(build_pairs(std::vector<PatientRecord>{a}, no_cs).inputs.cols() == 2 + 3);
}

TEST_CASE("build_pairs ignores the order of its input") {
  SynthConfig cfg;
  cfg.n_patients = 12;
  cfg.missing_rate = 0.0;
  cfg.seed = 4;
  std::vector<PatientRecord> records = generate(cfg);
  const TrainingSet a = build_pairs(records, PairOptions{});
  std::reverse(records.begin(), records.end());
  std::swap(records[1], records[5]);
  const TrainingSet b = build_pairs(records, PairOptions{});
  CHECK(a.inputs == b.inputs);
  CHECK(a.targets == b.targets);
  CHECK(a.pair_index == b.pair_index);
}

TEST_CASE("a 100 patient synthetic cohort yields one row per consecutive visit pair") {
  SynthConfig cfg;
  cfg.seed = 8;
  cfg.missing_rate = 0.0;
  const auto records = generate(cfg);
  std::size_t expected = 0;
  for (const auto& r : records) expected += r.visits.size() - 1;
  const TrainingSet t = build_pairs(records, PairOptions{});
  CHECK(static_cast<std::size_t>(t.rows()) == expected);
  // Roughly 100 * (7.3 - 1) with the truncation nudging the mean upward.
  CHECK(expected > 500);
  CHECK(expected < 800);
  for (Eigen::Index r = 0; r + 1 < t.rows(); ++r) {
    if (t.pair_index[static_cast<std::size_t>(r)].patient_id == t.pair_index[static_cast<std::size_t>(r + 1)].patient_id) {
      CHECK(t.pair_index[static_cast<std::size_t>(r)].visit < t.pair_index[static_cast<std::size_t>(r + 1)].visit);
    }
  }
}

TEST_CASE("pipeline statistics come from training patients only") {
  SynthConfig cfg;
  cfg.n_patients = 30;
  cfg.seed = 9;
  const auto records = generate(cfg);
  std::vector<PatientRecord> train(records.begin(), records.begin() + 20);
  const FeaturePipeline pipe = FeaturePipeline::fit(train, PipelineConfig{});

  // Leakage canary: a test patient with absurd feature values must not move
  // any fitted statistic, while adding it to the training set does.
  PatientRecord canary = records[25];
  canary.patient_id = "canary";
  for (auto& v : canary.visits) {
    v.features.setConstant(1e6);
    v.feature_present.setConstant(true);
  }
  const PreparedPatient prepared = pipe.prepare(canary);
  const FeaturePipeline again = FeaturePipeline::fit(train, PipelineConfig{});
  CHECK(again.input_scaler().mean == pipe.input_scaler().mean);
  CHECK(again.pca().components == pipe.pca().components);
  CHECK(prepared.features.rows() == static_cast<Eigen::Index>(canary.visits.size()));

  std::vector<PatientRecord> leaky = train;
  leaky.push_back(canary);
  const FeaturePipeline tainted = FeaturePipeline::fit(leaky, PipelineConfig{});
  CHECK(tainted.input_scaler().mean != pipe.input_scaler().mean);
}

TEST_CASE("pipeline fallbacks, target units and observed mask") {
  const auto a = make_record("1", {{kMiss, 2.0}, {4.0, kMiss}, {6.0, 3.0}},
                             {{{30, 10, 0, 0}}, {{kMiss, 12, 1, 1}}, {{26, 14, 2, 1}}});
  const auto b = make_record("2", {{2.0, 5.0}, {kMiss, 7.0}}, {{{24, 20, 3, 1}}, {{22, 22, 4, 2}}});
  const FeaturePipeline pipe = FeaturePipeline::fit({a, b}, PipelineConfig{});
  CHECK(pipe.feature_fallback()(0) == doctest::Approx(4.0));
  CHECK(pipe.feature_fallback()(1) == doctest::Approx(17.0 / 4.0));
  CHECK(pipe.target_fallback()(0) == doctest::Approx(25.5));

  const PreparedPatient p = pipe.prepare(a);
  CHECK_FALSE(p.target_observed(1, 0));
  CHECK(p.target_observed(2, 0));
  // Visit 1 MMSE is carried forward from visit 0, then standardized.
  CHECK(pipe.target_to_clinical(p.targets(1, 0), 0) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(pipe.target_to_clinical(p.targets(2, 1), 1) == doctest::Approx(14.0).epsilon(1e-12));
  CHECK(pipe.variance_to_clinical(1.0, 1) == doctest::Approx(pipe.target_scaler().std(1) * pipe.target_scaler().std(1)));

  PipelineConfig raw;
  raw.standardize_targets = false;
  const FeaturePipeline raw_pipe = FeaturePipeline::fit({a, b}, raw);
  CHECK(raw_pipe.prepare(a).targets(2, 1) == 14.0);
}
