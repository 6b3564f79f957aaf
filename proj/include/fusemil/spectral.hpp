#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "fusemil/affinity.hpp"
#include "fusemil/types.hpp"

namespace fusemil {

struct ClusterQuality {
  double sc = std::numeric_limits<double>::quiet_NaN();
  double ch = std::numeric_limits<double>::quiet_NaN();
};

struct ClusterAssignment {
  std::string slide_id;
  std::vector<int> labels;                // per patch, in [0, k)
  int k = 0;
  std::vector<std::vector<int>> members;  // per cluster, ascending patch indices
  ClusterQuality quality;

  void validate() const;
  static ClusterAssignment from_labels(const std::string& slide_id, std::vector<int> labels, int k);
};

struct SpectralOptions {
  int n_neighbors = -1;  // <= 0: ceil(log2(n)) + 1
  SigmaMode sigma_mode = SigmaMode::local_scaling;
  int restarts = 50;
  int max_iter = 300;
  bool compute_quality = true;  // silhouette/variance-ratio on the concatenated views
};

/// Joint clustering over all views: each view's affinity is symmetrically
/// normalized, the normalized affinities are averaged, and k-means++ runs on
/// the row-normalized top-k eigenvector embedding of the average. Quality
/// scores are computed on the concatenated raw views. Deterministic given
/// seed. `embedding_out`, when non-null, receives the spectral embedding.
ClusterAssignment multiview_spectral_cluster(const MultiViewSet& set, int k, std::uint64_t seed,
                                             const SpectralOptions& opts = {},
                                             Matd* embedding_out = nullptr);

/// Same pipeline on a single view (the single-view baseline).
std::vector<int> spectral_cluster_view(const Matd& points, int k, std::uint64_t seed,
                                       const SpectralOptions& opts = {});

/// Feature-axis concatenation of all views, row alignment preserved.
Matd concat_view_features(const MultiViewSet& set);

}  // namespace fusemil
