#pragma once

#include <string>

#include "fusemil/types.hpp"

namespace fusemil {

/// On-disk cohort layout:
///   <dir>/registry.csv             kind,name,dim rows (kind: view|teacher)
///   <dir>/labels.csv               cohort labels table
///   <dir>/views/<slide>__<model>.fcpe
///   <dir>/teachers/<slide>__<teacher>.fcpe
void save_cohort(const std::string& dir, const Cohort& cohort, const ModelRegistry& registry);

struct LoadedCohort {
  Cohort cohort;
  ModelRegistry registry;
};

LoadedCohort load_cohort(const std::string& dir, int n_threads = 1);

void write_registry_csv(const std::string& path, const ModelRegistry& registry);
ModelRegistry read_registry_csv(const std::string& path);

/// Registry inferred from a synthetic config (names + dims as configured).
ModelRegistry registry_from_synth(const SynthConfig& cfg);

}  // namespace fusemil
