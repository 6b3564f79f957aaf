#pragma once

#include <string>

#include "fusemil/model.hpp"

namespace fusemil {

/// Parameter checkpoint file (little-endian):
///   magic "FCPR" | u16 version=1 | u32 tensor_count |
///   per tensor: u32 name_len | name | u32 rows | u32 cols |
///               rows*cols float32 row-major | u32 crc32(payload)
/// Values are stored float32; loading widens back to double.
void save_checkpoint(const std::string& path, StudentModel& model);

/// Loads tensors by name into an already constructed model. Missing or extra
/// tensors, shape mismatches, and checksum failures are data errors.
void load_checkpoint(const std::string& path, StudentModel& model);

}  // namespace fusemil
