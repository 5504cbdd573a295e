#pragma once

#include <cstdint>
#include <vector>

#include "pgp/ingestion.hpp"

namespace pgp {

struct SynthConfig {
  int n_patients = 100;
  // Visit counts: rounded normal draws, redrawn until inside [min_visits, max_visits].
  double visit_mean = 7.334;
  double visit_sd = 4.033;
  int min_visits = 1;
  int max_visits = 19;
  // Four static columns (demographics, genetics) plus dynamic ones.
  int feature_dim = 16;
  // Mean and spread of the per-patient progression rate, latent units per year.
  double drift_mean = 0.35;
  double drift_sd = 0.2;
  // Amplitude of the smooth GP-sampled deviation from the linear score map.
  double smooth_amplitude = 0.3;
  // Per-patient deviation from the population trajectory, invisible to the
  // features: offset_scale * (a + deviation_slope * b * years) with a, b
  // standard normal per patient and target. Zero makes the cohort homogeneous.
  double offset_scale = 1.0;
  double deviation_slope = 0.5;
  double noise_scale = 0.3;
  double feature_noise = 0.5;
  double missing_rate = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr int kSynthStaticFeatures = 4;

Schema synth_schema(const SynthConfig& config);

// Deterministic given the config. Targets are clipped to their clinical
// ranges; CS comes from thresholding a latent severity.
std::vector<PatientRecord> generate(const SynthConfig& config);

}  // namespace pgp
