#include "fusemil/kmeans.hpp"

#include <limits>

namespace fusemil {

namespace {

// Squared distances point->center via the Gram expansion; clamped at 0.
Matd center_distances(const Matd& points, const Matd& centers, const Vecd& point_sq) {
  Matd d2 = (-2.0 * points * centers.transpose()).eval();
  d2.colwise() += point_sq;
  d2.rowwise() += centers.rowwise().squaredNorm().transpose();
  return d2.cwiseMax(0.0);
}

Matd kmeanspp_init(const Matd& points, int k, const Vecd& point_sq, Rng& rng) {
  const int n = static_cast<int>(points.rows());
  Matd centers(k, points.cols());
  centers.row(0) = points.row(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  Vecd best_d2 =
      (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = best_d2.sum();
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    } else {
      double r = rng.uniform() * total;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        r -= best_d2(i);
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = points.row(pick);
    best_d2 = best_d2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  (void)point_sq;
  return centers;
}

}  // namespace

KmeansResult kmeans(const Matd& points, int k, Rng& rng, int restarts, int max_iter) {
  const int n = static_cast<int>(points.rows());
  if (k < 1) throw config_error("kmeans: k must be >= 1");
  if (n < k) throw config_error("kmeans: fewer points than clusters");

  const Vecd point_sq = points.rowwise().squaredNorm();
  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int run = 0; run < restarts; ++run) {
    Rng run_rng = rng.derive(static_cast<std::uint64_t>(run));
    Matd centers = kmeanspp_init(points, k, point_sq, run_rng);
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    double inertia = 0.0;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
      const Matd d2 = center_distances(points, centers, point_sq);
      bool changed = false;
      inertia = 0.0;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double lo = d2(i, 0);
        for (int c = 1; c < k; ++c)
          if (d2(i, c) < lo) {
            lo = d2(i, c);
            arg = c;
          }
        if (labels[static_cast<std::size_t>(i)] != arg) {
          labels[static_cast<std::size_t>(i)] = arg;
          changed = true;
        }
        inertia += lo;
      }
      if (!changed && iter > 0) break;

      Matd sums = Matd::Zero(k, points.cols());
      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      for (int i = 0; i < n; ++i) {
        sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
          centers.row(c) = sums.row(c) / double(counts[static_cast<std::size_t>(c)]);
        } else {
          // Re-seed an empty cluster from the farthest point.
          int far = 0;
          double far_d = -1.0;
          for (int i = 0; i < n; ++i) {
            const double d = d2(i, labels[static_cast<std::size_t>(i)]);
            if (d > far_d) {
              far_d = d;
              far = i;
            }
          }
          centers.row(c) = points.row(far);
        }
      }
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
      best.centers = centers;
      best.iterations = iter;
    }
  }
  return best;
}

}  // namespace fusemil
