#include "fusemil/selection.hpp"

#include "fusemil/rng.hpp"

namespace fusemil {

Selection select_patches(const ClusterAssignment& assignment, int per_cluster, std::uint64_t seed,
                         int replicate_id) {
  if (per_cluster < 1) throw config_error("select_patches: per_cluster must be >= 1");
  if (replicate_id < 0) throw config_error("select_patches: replicate_id must be >= 0");
  Selection sel;
  sel.slide_id = assignment.slide_id;
  sel.replicate_id = replicate_id;
  Rng rng = Rng(seed).derive("select").derive(assignment.slide_id).derive(
      static_cast<std::uint64_t>(replicate_id));
  for (int c = 0; c < assignment.k; ++c) {
    const auto& members = assignment.members[static_cast<std::size_t>(c)];
    if (members.empty()) continue;
    const int take = std::min<int>(per_cluster, static_cast<int>(members.size()));
    for (int pos : rng.sample_without_replacement(static_cast<int>(members.size()), take)) {
      sel.indices.push_back(members[static_cast<std::size_t>(pos)]);
      sel.cluster_of.push_back(c);
    }
  }
  return sel;
}

std::vector<Selection> repeated_summarize(const ClusterAssignment& assignment, int per_cluster,
                                          int n_replicates, std::uint64_t seed) {
  if (n_replicates < 1) throw config_error("repeated_summarize: n_replicates must be >= 1");
  std::vector<Selection> out;
  out.reserve(static_cast<std::size_t>(n_replicates));
  for (int r = 0; r < n_replicates; ++r)
    out.push_back(select_patches(assignment, per_cluster, seed, r));
  return out;
}

}  // namespace fusemil
