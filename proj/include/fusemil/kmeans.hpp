#pragma once

#include <cstdint>
#include <vector>

#include "fusemil/common.hpp"
#include "fusemil/rng.hpp"

namespace fusemil {

struct KmeansResult {
  std::vector<int> labels;
  Matd centers;  // k x dim
  double inertia = 0.0;
  int iterations = 0;
};

/// Lloyd iterations with k-means++ seeding. Runs `restarts` independent
/// seedings and keeps the lowest-inertia solution; each run stops when the
/// assignment is stable or after max_iter sweeps. Clusters that empty out are
/// re-seeded from the point farthest from its assigned center.
KmeansResult kmeans(const Matd& points, int k, Rng& rng, int restarts = 50, int max_iter = 300);

}  // namespace fusemil
