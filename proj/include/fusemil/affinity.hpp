#pragma once

#include <Eigen/Sparse>

#include "fusemil/types.hpp"

namespace fusemil {

enum class SigmaMode {
  local_scaling,  // sigma_i = distance to the ceil(n_neighbors/2)-th neighbor
  global_median,  // one sigma for all points: median pairwise distance
};

/// k-nearest-neighbor affinity graph with a Gaussian kernel
/// exp(-||x_i - x_j||^2 / (2 sigma_i sigma_j)), symmetrized by max, zero
/// diagonal. Duplicate points that would force sigma_i = 0 fall back to the
/// global median of the positive pairwise distances. Input where every point
/// is identical (and n > 2) is rejected as degenerate.
Eigen::SparseMatrix<double> build_affinity(const Matd& points, int n_neighbors,
                                           SigmaMode sigma_mode = SigmaMode::local_scaling);

inline Eigen::SparseMatrix<double> build_affinity(const PatchView& view, int n_neighbors,
                                                  SigmaMode sigma_mode = SigmaMode::local_scaling) {
  return build_affinity(view.matrix, n_neighbors, sigma_mode);
}

/// Default graph size: ceil(log2(n)) + 1 neighbors.
int default_n_neighbors(int n_points);

}  // namespace fusemil
