#pragma once

#include <vector>

#include "fusemil/common.hpp"

namespace fusemil {

/// Mean silhouette over all points, (b - a) / max(a, b) with the usual
/// within/nearest-other-cluster distances; singleton clusters contribute 0.
/// Requires at least two non-empty clusters.
double silhouette(const Matd& features, const std::vector<int>& labels);

/// Variance-ratio score [tr(B)/(K-1)] / [tr(W)/(N-K)] over non-empty
/// clusters. Zero within-cluster scatter returns +infinity with a warning.
double calinski_harabasz(const Matd& features, const std::vector<int>& labels);

/// Adjusted Rand index between two partitions of the same points.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace fusemil
