#include "pgp/synth.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pgp/error.hpp"

namespace pgp {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::array<Modality, 4> kDynamicModalities = {Modality::cognitive, Modality::csf,
                                                        Modality::mri, Modality::dti};
constexpr std::array<const char*, 4> kDynamicPrefix = {"COG", "CSF", "MRI", "DTI"};

// Score = center + direction * (latent score + offset + noise).
constexpr std::array<double, 3> kCenter = {27.0, 15.0, 2.0};
constexpr std::array<double, 3> kDirection = {-2.5, 6.0, 1.8};
constexpr double kMciThreshold = 0.0;
constexpr double kAdThreshold = 1.5;
constexpr double kCsNoise = 0.15;

// Smooth random function on a grid, sampled from an RBF GP prior.
class SmoothCurve {
 public:
  SmoothCurve(std::mt19937_64& rng, double amplitude) {
    const int n = static_cast<int>((kHi - kLo) / kStep) + 1;
    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double d = (i - j) * kStep;
        k(i, j) = amplitude * amplitude * std::exp(-d * d / (2.0 * 1.5 * 1.5));
      }
    }
    k.diagonal().array() += 1e-8 + 1e-6 * amplitude * amplitude;
    const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(k).matrixL();
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = normal(rng);
    values_ = l * z;
  }

  double operator()(double s) const {
    const double pos = (std::clamp(s, kLo, kHi) - kLo) / kStep;
    const auto i = static_cast<Eigen::Index>(std::min(std::floor(pos), static_cast<double>(values_.size() - 2)));
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * values_(i) + w * values_(i + 1);
  }

 private:
  static constexpr double kLo = -5.0;
  static constexpr double kHi = 10.0;
  static constexpr double kStep = 0.25;
  Eigen::VectorXd values_;
};

}  // namespace

void SynthConfig::validate() const {
  if (n_patients < 0) throw InputError("synth: n_patients must be nonnegative");
  if (min_visits < 1 || max_visits < min_visits) throw InputError("synth: bad visit range");
  if (feature_dim < kSynthStaticFeatures + 1) {
    throw InputError("synth: feature_dim must be at least " + std::to_string(kSynthStaticFeatures + 1));
  }
  for (double v : {visit_sd, drift_sd, smooth_amplitude, offset_scale, deviation_slope, noise_scale,
                   feature_noise}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("synth: scales must be nonnegative");
  }
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw InputError("synth: missing_rate must lie in [0, 1)");
}

Schema synth_schema(const SynthConfig& config) {
  config.validate();
  Schema schema;
  schema.features = {{"AGE", Modality::demographics},
                     {"PTGENDER", Modality::demographics},
                     {"PTEDUCAT", Modality::demographics},
                     {"APOE4", Modality::genetics}};
  std::array<int, 4> counters{};
  for (int j = 0; j < config.feature_dim - kSynthStaticFeatures; ++j) {
    const std::size_t m = static_cast<std::size_t>(j) % kDynamicModalities.size();
    schema.features.push_back(
        {std::string(kDynamicPrefix[m]) + "_" + std::to_string(++counters[m]), kDynamicModalities[m]});
  }
  return schema;
}

std::vector<PatientRecord> generate(const SynthConfig& config) {
  config.validate();
  const int dynamic = config.feature_dim - kSynthStaticFeatures;

  // Cohort-level structure.
  std::mt19937_64 cohort_rng(splitmix64(config.seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<SmoothCurve, 4> smooth = {SmoothCurve(cohort_rng, config.smooth_amplitude),
                                       SmoothCurve(cohort_rng, config.smooth_amplitude),
                                       SmoothCurve(cohort_rng, config.smooth_amplitude),
                                       SmoothCurve(cohort_rng, config.smooth_amplitude)};
  Eigen::VectorXd loading(dynamic);
  Eigen::VectorXd center(dynamic);
  Eigen::VectorXd scale(dynamic);
  for (int j = 0; j < dynamic; ++j) {
    loading(j) = (0.5 + unit(cohort_rng)) * (unit(cohort_rng) < 0.5 ? -1.0 : 1.0);
    center(j) = 100.0 * normal(cohort_rng);
    scale(j) = std::exp(2.0 * normal(cohort_rng));
  }

  std::vector<PatientRecord> records;
  records.reserve(static_cast<std::size_t>(config.n_patients));
  for (int p = 0; p < config.n_patients; ++p) {
    std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(static_cast<std::uint64_t>(p) + 1)));
    PatientRecord record;
    record.patient_id = std::to_string(p + 1);

    int visits = 0;
    do {
      visits = static_cast<int>(std::lround(config.visit_mean + config.visit_sd * normal(rng)));
    } while (visits < config.min_visits || visits > config.max_visits);

    const double baseline = normal(rng);
    const double rate = std::max(0.0, config.drift_mean + config.drift_sd * normal(rng));
    std::array<double, 4> offset{};
    std::array<double, 4> slope{};
    for (std::size_t k = 0; k < 4; ++k) {
      offset[k] = config.offset_scale * normal(rng);
      slope[k] = config.offset_scale * config.deviation_slope * normal(rng);
    }
    const double age = 73.0 + 7.0 * normal(rng);
    const double gender = unit(rng) < 0.5 ? 0.0 : 1.0;
    const double education = 16.0 + 3.0 * normal(rng);
    const double apoe = std::floor(3.0 * unit(rng));

    for (int t = 0; t < visits; ++t) {
      Visit v;
      v.visit_index = t;
      v.month = t * kMonthsPerVisit;
      const double years = 0.5 * t;
      const double severity = baseline + rate * years;

      v.features.resize(config.feature_dim);
      v.features(0) = age + years;
      v.features(1) = gender;
      v.features(2) = education;
      v.features(3) = apoe;
      for (int j = 0; j < dynamic; ++j) {
        v.features(kSynthStaticFeatures + j) =
            center(j) + scale(j) * (loading(j) * severity + config.feature_noise * normal(rng));
      }
      v.feature_present = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(config.feature_dim, true);
      for (int j = 0; j < config.feature_dim; ++j) {
        if (unit(rng) < config.missing_rate) {
          v.feature_present(j) = false;
          v.features(j) = kSentinel;
        }
      }

      for (std::size_t k = 0; k < 3; ++k) {
        const double latent = severity + smooth[k](severity) + offset[k] + slope[k] * years + config.noise_scale * normal(rng);
        v.targets(static_cast<Eigen::Index>(k)) =
            std::clamp(kCenter[k] + kDirection[k] * latent, 0.0, kTargetMax[k]);
      }
      const double cs_latent = severity + smooth[3](severity) + offset[3] + slope[3] * years + kCsNoise * normal(rng);
      v.targets(kCsIndex) = cs_latent < kMciThreshold ? 0.0 : (cs_latent < kAdThreshold ? 1.0 : 2.0);
      v.target_present.setConstant(true);
      record.visits.push_back(std::move(v));
    }
    record.missing_fraction = compute_missing_fraction(record);
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace pgp
