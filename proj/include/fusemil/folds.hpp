#pragma once

#include <cstdint>
#include <vector>

#include "fusemil/types.hpp"

namespace fusemil {

/// Assigns each record to exactly one validation fold. The split is
/// stratified on the joint key of all binary labels present, so each fold's
/// per-label composition matches the cohort within one slide. The train/val
/// ratio follows from n_folds (n_folds = 5 gives the 80%:20% split); `ratio`
/// is validated for sanity but the partition itself is fold-driven.
std::vector<CohortRecord> split_folds(std::vector<CohortRecord> records, int n_folds,
                                      double ratio, std::uint64_t seed);

inline std::vector<CohortRecord> split_folds(std::vector<CohortRecord> records,
                                             std::uint64_t seed) {
  return split_folds(std::move(records), 5, 0.8, seed);
}

}  // namespace fusemil
