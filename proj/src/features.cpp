#include "pgp/features.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <utility>

#include "pgp/error.hpp"

namespace pgp {
namespace {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

bool is_constant(double sd, double mean) {
  return !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
}

}  // namespace

Eigen::MatrixXd Scaler::transform(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != mean.size()) throw InputError("Scaler: column mismatch");
  return (rows.rowwise() - mean).array().rowwise() / std.array();
}

Eigen::MatrixXd Scaler::inverse_transform(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != mean.size()) throw InputError("Scaler: column mismatch");
  return (rows.array().rowwise() * std.array()).matrix().rowwise() + mean;
}

Scaler fit_scaler(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) throw InputError("fit_scaler: no rows");
  return fit_scaler(rows, Mask::Constant(rows.rows(), rows.cols(), true));
}

Scaler fit_scaler(const Eigen::MatrixXd& rows, const Mask& mask) {
  if (rows.rows() == 0) throw InputError("fit_scaler: no rows");
  if (mask.rows() != rows.rows() || mask.cols() != rows.cols()) {
    throw InputError("fit_scaler: mask shape mismatch");
  }
  const Eigen::Index d = rows.cols();
  Scaler s;
  s.mean = Eigen::RowVectorXd::Zero(d);
  s.std = Eigen::RowVectorXd::Ones(d);
  s.constant.assign(static_cast<std::size_t>(d), true);
  for (Eigen::Index j = 0; j < d; ++j) {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      if (mask(i, j)) {
        sum += rows(i, j);
        ++count;
      }
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      if (mask(i, j)) ss += (rows(i, j) - mean) * (rows(i, j) - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(count));
    s.mean(j) = mean;
    if (!is_constant(sd, mean)) {
      s.std(j) = sd;
      s.constant[static_cast<std::size_t>(j)] = false;
    }
  }
  return s;
}

Eigen::MatrixXd apply_scaler(const Scaler& scaler, const Eigen::MatrixXd& rows) {
  return scaler.transform(rows);
}

double PcaProjection::retained_ratio() const {
  const double total = total_variance();
  return total > 0.0 ? retained_variance() / total : 1.0;
}

PcaProjection fit_pca(const Eigen::MatrixXd& rows, double ratio) {
  if (rows.rows() < 2) throw InputError("fit_pca: need at least two rows");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InputError("fit_pca: ratio must lie in (0, 1]");
  const Eigen::Index d = rows.cols();

  PcaProjection p;
  p.mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - p.mean;
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(rows.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("fit_pca: eigen-decomposition failed");

  // Eigen returns ascending order.
  const Eigen::VectorXd values = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const double largest = std::max(values.size() > 0 ? values(0) : 0.0, 0.0);
  const double floor = largest * static_cast<double>(d) * 1e-14;

  p.explained_variance = values.unaryExpr([&](double v) { return v > floor ? v : 0.0; });
  const double total = p.explained_variance.sum();
  Eigen::Index rank = 0;
  while (rank < d && p.explained_variance(rank) > 0.0) ++rank;

  Eigen::Index k = 0;
  double cumulative = 0.0;
  while (k < rank) {
    cumulative += p.explained_variance(k);
    ++k;
    if (cumulative >= ratio * total * (1.0 - 1e-12)) break;
  }
  if (total == 0.0) k = 0;
  p.retained = k;

  p.components.resize(k, d);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd v = vectors.col(c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    p.components.row(c) = v.transpose();
  }
  return p;
}

Eigen::MatrixXd apply_pca(const PcaProjection& pca, const Eigen::MatrixXd& rows) {
  if (rows.cols() != pca.mean.size()) throw InputError("apply_pca: column mismatch");
  return (rows.rowwise() - pca.mean) * pca.components.transpose();
}

Eigen::Index ar_target_columns(const PairOptions& options) {
  return options.ar_include_cs ? kNumTargets : kNumTargets - 1;
}

PatientPairs make_patient_pairs(const PreparedPatient& patient, const PairOptions& options) {
  const Eigen::Index t_count = patient.features.rows();
  const Eigen::Index pairs = std::max<Eigen::Index>(t_count - 1, 0);
  const Eigen::Index d = patient.features.cols();
  const Eigen::Index extra = options.variant == Variant::auto_regressive ? ar_target_columns(options) : 0;

  PatientPairs out;
  out.patient_id = patient.patient_id;
  out.inputs.resize(pairs, d + extra);
  out.targets.resize(pairs, patient.targets.cols());
  for (Eigen::Index t = 0; t < pairs; ++t) {
    out.inputs.row(t).head(d) = patient.features.row(t);
    if (extra > 0) out.inputs.row(t).tail(extra) = patient.targets.row(t).head(extra);
    out.targets.row(t) = patient.targets.row(t + 1);
    out.visits.push_back(patient.visits.empty() ? static_cast<int>(t)
                                                : patient.visits[static_cast<std::size_t>(t)]);
  }
  return out;
}

TrainingSet build_pairs(const std::vector<PreparedPatient>& patients, const PairOptions& options) {
  std::vector<const PreparedPatient*> order;
  order.reserve(patients.size());
  for (const auto& p : patients) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const PreparedPatient* a, const PreparedPatient* b) {
    return patient_id_less(a->patient_id, b->patient_id);
  });

  TrainingSet set;
  set.variant = options.variant;
  std::vector<PatientPairs> parts;
  Eigen::Index rows = 0;
  Eigen::Index in_dim = -1;
  Eigen::Index out_dim = kNumTargets;
  for (const PreparedPatient* p : order) {
    PatientPairs pairs = make_patient_pairs(*p, options);
    if (in_dim < 0) {
      in_dim = pairs.inputs.cols();
      out_dim = pairs.targets.cols();
    } else if (pairs.inputs.cols() != in_dim || pairs.targets.cols() != out_dim) {
      throw InputError("build_pairs: patients have different feature dimensions");
    }
    if (pairs.inputs.rows() == 0) {
      set.warnings.push_back("patient " + p->patient_id + " has fewer than 2 visits; no pairs");
    }
    rows += pairs.inputs.rows();
    parts.push_back(std::move(pairs));
  }
  set.inputs.resize(rows, std::max<Eigen::Index>(in_dim, 0));
  set.targets.resize(rows, out_dim);
  Eigen::Index r = 0;
  for (const auto& part : parts) {
    const Eigen::Index n = part.inputs.rows();
    set.inputs.middleRows(r, n) = part.inputs;
    set.targets.middleRows(r, n) = part.targets;
    for (int v : part.visits) set.pair_index.push_back({part.patient_id, v});
    r += n;
  }
  return set;
}

PreparedPatient prepare_raw(const PatientRecord& filled) {
  const auto t_count = static_cast<Eigen::Index>(filled.visits.size());
  PreparedPatient p;
  p.patient_id = filled.patient_id;
  p.features.resize(t_count, filled.feature_dim());
  p.targets.resize(t_count, kNumTargets);
  p.target_observed.resize(t_count, kNumTargets);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    const Visit& v = filled.visits[static_cast<std::size_t>(t)];
    if (!v.feature_present.all() || !v.target_present.all()) {
      throw InputError("patient " + filled.patient_id + " still has missing cells; fill first");
    }
    p.visits.push_back(v.visit_index);
    p.features.row(t) = v.features.transpose();
    p.targets.row(t) = v.targets.transpose();
    p.target_observed.row(t) = v.target_present.transpose();
  }
  return p;
}

TrainingSet build_pairs(const std::vector<PatientRecord>& patients, const PairOptions& options) {
  std::vector<PreparedPatient> prepared;
  prepared.reserve(patients.size());
  for (const auto& p : patients) prepared.push_back(prepare_raw(p));
  return build_pairs(prepared, options);
}

FeaturePipeline FeaturePipeline::fit(const std::vector<PatientRecord>& training,
                                     const PipelineConfig& config) {
  Eigen::Index rows = 0;
  Eigen::Index d = -1;
  for (const auto& r : training) {
    rows += static_cast<Eigen::Index>(r.visits.size());
    if (!r.visits.empty()) {
      if (d >= 0 && r.feature_dim() != d) throw InputError("training records disagree on feature count");
      d = r.feature_dim();
    }
  }
  if (rows < 2) throw InputError("FeaturePipeline: need at least two training visits");

  Eigen::MatrixXd features(rows, d);
  Mask feature_mask(rows, d);
  Eigen::MatrixXd targets(rows, kNumTargets);
  Mask target_mask(rows, kNumTargets);
  Eigen::Index i = 0;
  for (const auto& r : training) {
    for (const auto& v : r.visits) {
      features.row(i) = v.features.transpose();
      feature_mask.row(i) = v.feature_present.transpose();
      targets.row(i) = v.targets.transpose();
      target_mask.row(i) = v.target_present.transpose();
      ++i;
    }
  }

  FeaturePipeline pipe;
  pipe.config_ = config;
  // Statistics over observed training cells; the fallback is their mean, so
  // never-observed cells land on zero after scaling.
  pipe.input_scaler_ = fit_scaler(features, feature_mask);
  pipe.feature_fallback_ = pipe.input_scaler_.mean.transpose();
  pipe.target_scaler_ = fit_scaler(targets, target_mask);
  pipe.target_fallback_ = pipe.target_scaler_.mean.transpose();
  if (!config.standardize_targets) {
    pipe.target_scaler_.mean.setZero();
    pipe.target_scaler_.std.setOnes();
  }

  Eigen::MatrixXd filled(rows, d);
  i = 0;
  for (const auto& r : training) {
    const PatientRecord f = forward_fill(r, pipe.feature_fallback_, pipe.target_fallback_);
    for (const auto& v : f.visits) filled.row(i++) = v.features.transpose();
  }
  pipe.pca_ = fit_pca(pipe.input_scaler_.transform(filled), config.pca_ratio);
  return pipe;
}

PreparedPatient FeaturePipeline::prepare(const PatientRecord& raw) const {
  PreparedPatient p = prepare_raw(forward_fill(raw, feature_fallback_, target_fallback_));
  for (Eigen::Index t = 0; t < p.target_observed.rows(); ++t) {
    p.target_observed.row(t) = raw.visits[static_cast<std::size_t>(t)].target_present.transpose();
  }
  p.features = apply_pca(pca_, input_scaler_.transform(p.features));
  p.targets = target_scaler_.transform(p.targets);
  return p;
}

double FeaturePipeline::target_to_clinical(double value, int column) const {
  return value * target_scaler_.std(column) + target_scaler_.mean(column);
}

double FeaturePipeline::variance_to_clinical(double variance, int column) const {
  return variance * target_scaler_.std(column) * target_scaler_.std(column);
}

FeaturePipeline FeaturePipeline::from_parts(PipelineConfig config, Eigen::VectorXd feature_fallback,
                                            Eigen::Vector4d target_fallback, Scaler input_scaler,
                                            PcaProjection pca, Scaler target_scaler) {
  FeaturePipeline p;
  p.config_ = config;
  p.feature_fallback_ = std::move(feature_fallback);
  p.target_fallback_ = target_fallback;
  p.input_scaler_ = std::move(input_scaler);
  p.pca_ = std::move(pca);
  p.target_scaler_ = std::move(target_scaler);
  return p;
}

}  // namespace pgp
