#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fusemil/common.hpp"

namespace fusemil {

/// Run provenance written once per output directory. Timestamps make the
/// manifest itself non-reproducible by design; idempotency claims cover the
/// data outputs, not this file.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;  // path -> sha1 of contents
  std::string started_at;
  std::string finished_at;
  std::string output_dir;

  void write(const std::string& dir) const;  // <dir>/manifest.json
};

std::string iso_timestamp_now();

/// Creates the output directory. An existing non-empty directory is rejected
/// unless force is set (the lock file and a previous manifest do not count as
/// content when force re-runs into the same directory).
void prepare_output_dir(const std::string& dir, bool force);

/// Exclusive lock on an output directory for the lifetime of the object.
class DirLock {
 public:
  explicit DirLock(const std::string& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
};

}  // namespace fusemil
