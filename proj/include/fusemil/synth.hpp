#pragma once

#include "fusemil/types.hpp"

namespace fusemil {

/// Generator internals exposed for tests and trend experiments: the planted
/// cluster structure and the latent risk score behind every label.
struct SynthLatent {
  Matd cluster_centers;                       // n_latent_clusters x latent_dim
  Vecd label_functional;                      // unit vector w
  double label_threshold = 0.0;               // classification cut on w . mean_latent
  std::vector<Vecd> slide_mean_latent;        // per slide
  std::vector<double> slide_score;            // noiseless w . mean_latent per slide
  std::vector<std::vector<int>> patch_cluster;  // planted per-patch cluster ids
};

struct SynthResult {
  Cohort cohort;
  SynthLatent latent;
};

/// Deterministic synthetic cohort. Every patch carries a planted cluster id;
/// its latent code is the cluster center (shared across views), so view rows
/// are per-view linear images of the center plus iid Gaussian noise. Slide
/// labels, expression, survival and teacher vectors all derive from the
/// slide's mean latent code:
///   binary label   : w . mean + eps / label_signal_strength  thresholded at
///                    the cohort median (label_signal_strength = +inf gives
///                    exact thresholding, 0 gives coin flips)
///   expression     : affine image of mean, clipped at 0
///   survival       : exponential with log-hazard ln(hazard_ratio) per sd of
///                    the standardized score; independent censoring at
///                    censor_fraction
///   teacher vector : per-teacher affine image of mean + Gaussian noise
SynthResult synth_cohort(const SynthConfig& cfg);

/// Name of the single synthetic biomarker column.
inline const char* synth_biomarker_name() { return "marker"; }

/// Parses the documented key = value schema; unknown keys are config errors.
SynthConfig synth_config_from_keyval(const class KeyVal& kv);

}  // namespace fusemil
