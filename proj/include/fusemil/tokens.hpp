#pragma once

#include <utility>
#include <vector>

#include "fusemil/selection.hpp"
#include "fusemil/types.hpp"

namespace fusemil {

/// Selected, feature-concatenated token matrix for one slide replicate.
/// Rows are grouped contiguously by cluster, ordered by cluster id then
/// original patch index; this order is also the position-encoding sequence.
struct TokenBatch {
  std::string slide_id;
  int replicate_id = 0;
  Matd tokens;                  // n_tokens x total_dim
  std::vector<int> cluster_of;  // per token, non-decreasing

  int n_tokens() const { return static_cast<int>(tokens.rows()); }
  int dim() const { return static_cast<int>(tokens.cols()); }

  /// Contiguous [begin, end) row ranges per distinct cluster, in order.
  std::vector<std::pair<int, int>> cluster_spans() const;

  void validate() const;
};

/// Gathers the selected rows of every view and concatenates them along the
/// feature axis; row t is view_1[idx_t] ++ ... ++ view_V[idx_t].
TokenBatch concat_views(const Selection& selection, const MultiViewSet& set);

}  // namespace fusemil
