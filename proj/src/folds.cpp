#include "fusemil/folds.hpp"

#include <algorithm>
#include <map>

#include "fusemil/rng.hpp"

namespace fusemil {

std::vector<CohortRecord> split_folds(std::vector<CohortRecord> records, int n_folds,
                                      double ratio, std::uint64_t seed) {
  if (n_folds < 2) throw config_error("split_folds: n_folds must be >= 2");
  if (ratio <= 0.0 || ratio >= 1.0) throw config_error("split_folds: ratio must be in (0, 1)");
  if (static_cast<int>(records.size()) < n_folds)
    throw config_error("split_folds: fewer slides than folds");

  // Joint stratification key over every binary label a record carries.
  std::map<std::string, std::vector<int>> strata;
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    std::string key;
    for (const auto& [name, value] : records[static_cast<std::size_t>(i)].binary_labels)
      key += name + "=" + std::to_string(value) + "|";
    strata[key].push_back(i);
  }

  Rng rng = Rng(seed).derive("folds");
  int cursor = 0;  // running fold pointer keeps total fold sizes within +-1
  for (auto& [key, members] : strata) {
    (void)key;
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      return records[static_cast<std::size_t>(a)].slide_id <
             records[static_cast<std::size_t>(b)].slide_id;
    });
    rng.shuffle(members);
    for (int idx : members) {
      records[static_cast<std::size_t>(idx)].fold_id = cursor % n_folds;
      ++cursor;
    }
  }
  return records;
}

}  // namespace fusemil
