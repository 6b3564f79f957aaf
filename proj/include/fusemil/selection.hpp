#pragma once

#include <cstdint>
#include <vector>

#include "fusemil/spectral.hpp"

namespace fusemil {

/// One summarization of a slide: the sampled patch indices, grouped by
/// cluster id ascending and by patch index inside each cluster (this order is
/// the downstream token order).
struct Selection {
  std::string slide_id;
  std::vector<int> indices;
  std::vector<int> cluster_of;  // parallel to indices
  int replicate_id = 0;

  int size() const { return static_cast<int>(indices.size()); }
};

/// Samples min(per_cluster, cluster size) patches uniformly without
/// replacement from every non-empty cluster. Deterministic per
/// (seed, slide_id, replicate_id).
Selection select_patches(const ClusterAssignment& assignment, int per_cluster, std::uint64_t seed,
                         int replicate_id);

/// n_replicates independent selections with replicate ids 0..n_replicates-1.
std::vector<Selection> repeated_summarize(const ClusterAssignment& assignment, int per_cluster,
                                          int n_replicates, std::uint64_t seed);

}  // namespace fusemil
