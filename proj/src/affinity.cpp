#include "fusemil/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fusemil {

int default_n_neighbors(int n_points) {
  int k = static_cast<int>(std::ceil(std::log2(std::max(2, n_points)))) + 1;
  return std::min(k, n_points - 1);
}

Eigen::SparseMatrix<double> build_affinity(const Matd& points, int n_neighbors,
                                           SigmaMode sigma_mode) {
  const int n = static_cast<int>(points.rows());
  if (n < 2) throw data_error("build_affinity: need at least 2 points");
  if (n < n_neighbors + 1)
    throw config_error("build_affinity: need n >= n_neighbors + 1");
  if (!all_finite(points)) throw data_error("build_affinity: non-finite input");

  // Squared distances via the Gram expansion.
  const Vecd sq = points.rowwise().squaredNorm();
  Matd d2 = (-2.0 * points * points.transpose()).eval();
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  d2 = d2.cwiseMax(0.0);

  std::vector<double> offdiag;
  offdiag.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) offdiag.push_back(std::sqrt(d2(i, j)));
  std::vector<double> positive;
  for (double d : offdiag)
    if (d > 0) positive.push_back(d);

  if (positive.empty()) {
    // Every point identical. A two-point input still has a well-defined
    // kernel value at distance zero; larger inputs have no usable geometry.
    if (n > 2) throw data_error("build_affinity: all points identical (degenerate input)");
  }
  double median_dist = 1.0;
  if (!positive.empty()) {
    std::nth_element(positive.begin(), positive.begin() + positive.size() / 2, positive.end());
    median_dist = positive[positive.size() / 2];
  }

  // Neighbor lists (self excluded), ascending distance with index tiebreak.
  const int sigma_rank = std::max(1, (n_neighbors + 1) / 2);  // ceil(k/2), 1-based
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
  Vecd sigma(n);
  std::vector<std::pair<double, int>> order(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    int m = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) order[static_cast<std::size_t>(m++)] = {d2(i, j), j};
    std::sort(order.begin(), order.end());
    auto& lst = nbrs[static_cast<std::size_t>(i)];
    lst.resize(static_cast<std::size_t>(n_neighbors));
    for (int k = 0; k < n_neighbors; ++k) lst[static_cast<std::size_t>(k)] = order[static_cast<std::size_t>(k)].second;
    double s = median_dist;
    if (sigma_mode == SigmaMode::local_scaling) {
      s = std::sqrt(order[static_cast<std::size_t>(sigma_rank - 1)].first);
      if (s <= 0.0) s = median_dist;
    }
    sigma(i) = s;
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n_neighbors) * 2);
  Matd w = Matd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j : nbrs[static_cast<std::size_t>(i)])
      w(i, j) = std::exp(-d2(i, j) / (2.0 * sigma(i) * sigma(j)));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = std::max(w(i, j), w(j, i));  // symmetrize by max
      if (v > 0.0) {
        triplets.emplace_back(i, j, v);
        triplets.emplace_back(j, i, v);
      }
    }

  Eigen::SparseMatrix<double> affinity(n, n);
  affinity.setFromTriplets(triplets.begin(), triplets.end());
  return affinity;
}

}  // namespace fusemil
