#pragma once

#include <string>

#include "fusemil/types.hpp"

namespace fusemil {

/// Embedding container file layout (little-endian):
///   magic "FCPE" | u16 version=1 | u32 n_rows | u32 n_cols |
///   u32 name_len | name bytes (UTF-8) | n_rows*n_cols float32 row-major |
///   u32 crc32(payload)
/// Matrices are stored float32 and widened to double in memory, so a
/// write/load round trip reproduces canonical files byte-for-byte.
struct ViewContainer {
  std::string model_name;
  Matd data;
};

void write_container(const std::string& path, const std::string& model_name,
                     const Matd& data);
ViewContainer read_container(const std::string& path);

/// Reads a patch-view container and validates it against the registry:
/// unknown model or dimension mismatch -> schema_error; non-finite -> data_error.
PatchView load_view(const std::string& path, const ModelRegistry& registry,
                    const std::string& slide_id);
void write_view(const std::string& path, const PatchView& view);

/// Teacher vectors use the same container with a single row.
Vecd load_teacher_vector(const std::string& path, const ModelRegistry& registry,
                         std::string* teacher_name = nullptr);
void write_teacher_vector(const std::string& path, const std::string& teacher_name,
                          const Vecd& v);

}  // namespace fusemil
