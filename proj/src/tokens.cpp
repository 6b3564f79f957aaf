#include "fusemil/tokens.hpp"

namespace fusemil {

std::vector<std::pair<int, int>> TokenBatch::cluster_spans() const {
  std::vector<std::pair<int, int>> spans;
  const int n = n_tokens();
  int begin = 0;
  for (int t = 1; t <= n; ++t) {
    if (t == n || cluster_of[static_cast<std::size_t>(t)] != cluster_of[static_cast<std::size_t>(begin)]) {
      spans.emplace_back(begin, t);
      begin = t;
    }
  }
  return spans;
}

void TokenBatch::validate() const {
  if (static_cast<int>(cluster_of.size()) != n_tokens())
    throw data_error("token batch: cluster tags do not match token count");
  for (std::size_t t = 1; t < cluster_of.size(); ++t)
    if (cluster_of[t] < cluster_of[t - 1])
      throw data_error("token batch: tokens must be grouped by ascending cluster id");
  if (!all_finite(tokens)) throw data_error("token batch: non-finite token values");
}

TokenBatch concat_views(const Selection& selection, const MultiViewSet& set) {
  set.validate();
  const int n_sel = selection.size();
  const int n_patches = set.n_patches();
  for (int idx : selection.indices)
    if (idx < 0 || idx >= n_patches)
      throw data_error("concat_views: selection index " + std::to_string(idx) +
                       " out of range for slide '" + set.slide_id + "'");

  TokenBatch batch;
  batch.slide_id = selection.slide_id;
  batch.replicate_id = selection.replicate_id;
  batch.cluster_of = selection.cluster_of;
  batch.tokens.resize(n_sel, set.total_dim());
  int col = 0;
  for (const auto& view : set.views) {
    for (int t = 0; t < n_sel; ++t)
      batch.tokens.block(t, col, 1, view.dim()) =
          view.matrix.row(selection.indices[static_cast<std::size_t>(t)]);
    col += view.dim();
  }
  batch.validate();
  return batch;
}

}  // namespace fusemil
