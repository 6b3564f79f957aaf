#include "fusemil/cluster_quality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace fusemil {

namespace {

// Remaps labels to dense ids [0, k) of non-empty clusters.
std::vector<int> dense_labels(const std::vector<int>& labels, int* k_out) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = remap.emplace(labels[i], static_cast<int>(remap.size()));
    (void)fresh;
    out[i] = it->second;
  }
  *k_out = static_cast<int>(remap.size());
  return out;
}

}  // namespace

double silhouette(const Matd& features, const std::vector<int>& labels) {
  const int n = static_cast<int>(features.rows());
  if (static_cast<int>(labels.size()) != n)
    throw data_error("silhouette: labels/features size mismatch");
  int k = 0;
  const auto lab = dense_labels(labels, &k);
  if (k < 2) throw data_error("silhouette: undefined for a single cluster");

  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int l : lab) ++counts[static_cast<std::size_t>(l)];

  // Pairwise Euclidean distances via the Gram expansion.
  const Vecd sq = features.rowwise().squaredNorm();
  Matd d2 = (-2.0 * features * features.transpose()).eval();
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  const Matd dist = d2.cwiseMax(0.0).cwiseSqrt();

  double total = 0.0;
  Vecd cluster_sum(k);
  for (int i = 0; i < n; ++i) {
    cluster_sum.setZero();
    for (int j = 0; j < n; ++j) cluster_sum(lab[static_cast<std::size_t>(j)]) += dist(i, j);
    const int own = lab[static_cast<std::size_t>(i)];
    if (counts[static_cast<std::size_t>(own)] == 1) continue;  // singleton: s_i = 0
    const double a = cluster_sum(own) / double(counts[static_cast<std::size_t>(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != own) b = std::min(b, cluster_sum(c) / double(counts[static_cast<std::size_t>(c)]));
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / double(n);
}

double calinski_harabasz(const Matd& features, const std::vector<int>& labels) {
  const int n = static_cast<int>(features.rows());
  if (static_cast<int>(labels.size()) != n)
    throw data_error("calinski_harabasz: labels/features size mismatch");
  int k = 0;
  const auto lab = dense_labels(labels, &k);
  if (k < 2) throw data_error("calinski_harabasz: undefined for a single cluster");
  if (n <= k) throw data_error("calinski_harabasz: requires more points than clusters");

  const Eigen::RowVectorXd overall = features.colwise().mean();
  Matd centroids = Matd::Zero(k, features.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < n; ++i) {
    centroids.row(lab[static_cast<std::size_t>(i)]) += features.row(i);
    ++counts[static_cast<std::size_t>(lab[static_cast<std::size_t>(i)])];
  }
  double between = 0.0, within = 0.0;
  for (int c = 0; c < k; ++c) {
    centroids.row(c) /= double(counts[static_cast<std::size_t>(c)]);
    between += double(counts[static_cast<std::size_t>(c)]) *
               (centroids.row(c) - overall).squaredNorm();
  }
  for (int i = 0; i < n; ++i)
    within += (features.row(i) - centroids.row(lab[static_cast<std::size_t>(i)])).squaredNorm();

  if (within <= 0.0) {
    warn("calinski_harabasz: zero within-cluster scatter, returning +inf");
    return std::numeric_limits<double>::infinity();
  }
  return (between / double(k - 1)) / (within / double(n - k));
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty())
    throw data_error("adjusted_rand_index: partitions must be nonempty and equal-sized");
  int ka = 0, kb = 0;
  const auto la = dense_labels(a, &ka);
  const auto lb = dense_labels(b, &kb);
  Matd table = Matd::Zero(ka, kb);
  for (std::size_t i = 0; i < la.size(); ++i) table(la[i], lb[i]) += 1.0;

  auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0;
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) sum_ij += comb2(table(i, j));
  double sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < ka; ++i) sum_a += comb2(table.row(i).sum());
  for (int j = 0; j < kb; ++j) sum_b += comb2(table.col(j).sum());
  const double total = comb2(static_cast<double>(la.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;  // both partitions trivial and identical in structure
  return (sum_ij - expected) / denom;
}

}  // namespace fusemil
