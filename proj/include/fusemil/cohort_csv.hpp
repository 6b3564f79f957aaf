#pragma once

#include <string>
#include <vector>

#include "fusemil/types.hpp"

namespace fusemil {

/// Labels table, UTF-8 CSV. Columns: slide_id, one "biomarker:<name>" column
/// per biomarker (values 0/1/empty), one "expr:<gene>" column per gene
/// (float/empty), surv_time, surv_event. Empty cells mean "absent". A record
/// must fill either all or none of the expr columns.
std::vector<CohortRecord> read_labels_csv(const std::string& path);
void write_labels_csv(const std::string& path, const std::vector<CohortRecord>& records);

/// Minimal CSV splitting used across the exporters; fields must not contain
/// commas or newlines.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace fusemil
