#include "fusemil/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>

#include "fusemil/cluster_quality.hpp"
#include "fusemil/kmeans.hpp"
#include "fusemil/rng.hpp"

namespace fusemil {

void ClusterAssignment::validate() const {
  if (k < 1) throw data_error("cluster assignment: k must be >= 1");
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int l : labels) {
    if (l < 0 || l >= k) throw data_error("cluster assignment: label out of range");
    ++counts[static_cast<std::size_t>(l)];
  }
  if (members.size() != static_cast<std::size_t>(k))
    throw data_error("cluster assignment: members list size mismatch");
  std::size_t total = 0;
  for (int c = 0; c < k; ++c) {
    const auto& m = members[static_cast<std::size_t>(c)];
    if (static_cast<int>(m.size()) != counts[static_cast<std::size_t>(c)])
      throw data_error("cluster assignment: members inconsistent with labels");
    for (int idx : m)
      if (labels[static_cast<std::size_t>(idx)] != c)
        throw data_error("cluster assignment: members inconsistent with labels");
    total += m.size();
  }
  if (total != labels.size()) throw data_error("cluster assignment: not a partition");
}

ClusterAssignment ClusterAssignment::from_labels(const std::string& slide_id,
                                                 std::vector<int> labels, int k) {
  ClusterAssignment a;
  a.slide_id = slide_id;
  a.k = k;
  a.members.assign(static_cast<std::size_t>(k), {});
  for (int i = 0; i < static_cast<int>(labels.size()); ++i)
    a.members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
  a.labels = std::move(labels);
  a.validate();
  return a;
}

Matd concat_view_features(const MultiViewSet& set) {
  const int n = set.n_patches();
  Matd out(n, set.total_dim());
  int col = 0;
  for (const auto& v : set.views) {
    out.middleCols(col, v.dim()) = v.matrix;
    col += v.dim();
  }
  return out;
}

namespace {

// D^{-1/2} W D^{-1/2} for a kNN affinity; isolated rows cannot occur since
// every point keeps at least one neighbor.
Matd normalized_affinity(const Eigen::SparseMatrix<double>& w) {
  const Matd dense = Matd(w);
  Vecd deg = dense.rowwise().sum();
  for (int i = 0; i < deg.size(); ++i)
    deg(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  return deg.asDiagonal() * dense * deg.asDiagonal();
}

Matd spectral_embedding_from_average(const Matd& averaged, int k) {
  Eigen::SelfAdjointEigenSolver<Matd> solver(averaged);
  if (solver.info() != Eigen::Success)
    throw numeric_error("spectral clustering: eigensolver failed to converge (n=" +
                        std::to_string(averaged.rows()) + ", k=" + std::to_string(k) + ")");
  // Eigen sorts eigenvalues ascending; the top-k eigenvectors sit rightmost.
  Matd embedding = solver.eigenvectors().rightCols(k);
  for (int i = 0; i < embedding.rows(); ++i) {
    const double norm = embedding.row(i).norm();
    if (norm > 0.0) embedding.row(i) /= norm;
  }
  return embedding;
}

std::vector<int> cluster_embedding(const Matd& embedding, int k, std::uint64_t seed,
                                   const SpectralOptions& opts) {
  Rng rng = Rng(seed).derive("kmeans");
  return kmeans(embedding, k, rng, opts.restarts, opts.max_iter).labels;
}

}  // namespace

ClusterAssignment multiview_spectral_cluster(const MultiViewSet& set, int k, std::uint64_t seed,
                                             const SpectralOptions& opts, Matd* embedding_out) {
  set.validate();
  const int n = set.n_patches();
  if (n < k)
    throw config_error("multiview_spectral_cluster: slide '" + set.slide_id + "' has " +
                       std::to_string(n) + " patches, fewer than k=" + std::to_string(k));

  const int n_neighbors = opts.n_neighbors > 0
                              ? std::min(opts.n_neighbors, n - 1)
                              : default_n_neighbors(n);
  Matd averaged = Matd::Zero(n, n);
  for (const auto& view : set.views)
    averaged += normalized_affinity(build_affinity(view.matrix, n_neighbors, opts.sigma_mode));
  averaged /= double(set.n_views());

  const Matd embedding = spectral_embedding_from_average(averaged, k);
  if (embedding_out) *embedding_out = embedding;
  auto labels = cluster_embedding(embedding, k, seed, opts);

  ClusterAssignment assignment = ClusterAssignment::from_labels(set.slide_id, std::move(labels), k);
  if (opts.compute_quality) {
    int non_empty = 0;
    for (const auto& m : assignment.members) non_empty += m.empty() ? 0 : 1;
    if (non_empty >= 2 && n > non_empty) {
      const Matd features = concat_view_features(set);
      assignment.quality.sc = silhouette(features, assignment.labels);
      assignment.quality.ch = calinski_harabasz(features, assignment.labels);
    }
  }
  return assignment;
}

std::vector<int> spectral_cluster_view(const Matd& points, int k, std::uint64_t seed,
                                       const SpectralOptions& opts) {
  const int n = static_cast<int>(points.rows());
  if (n < k) throw config_error("spectral_cluster_view: fewer points than clusters");
  const int n_neighbors = opts.n_neighbors > 0
                              ? std::min(opts.n_neighbors, n - 1)
                              : default_n_neighbors(n);
  const Matd normalized = normalized_affinity(build_affinity(points, n_neighbors, opts.sigma_mode));
  const Matd embedding = spectral_embedding_from_average(normalized, k);
  return cluster_embedding(embedding, k, seed, opts);
}

}  // namespace fusemil
