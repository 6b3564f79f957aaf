#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace fusemil {

/// CRC-32 (IEEE, reflected, poly 0xEDB88320) over a byte range.
std::uint32_t crc32(const void* data, std::size_t n, std::uint32_t seed = 0);

/// SHA-1 hex digest; used for content hashes in run manifests.
std::string sha1_hex(const void* data, std::size_t n);
std::string sha1_hex(const std::string& s);

/// SHA-1 hex digest of a file's contents.
std::string sha1_file(const std::string& path);

}  // namespace fusemil
