#include "fusemil/manifest.hpp"

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <json.hpp>

namespace fusemil {

namespace fs = std::filesystem;

std::string iso_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::write(const std::string& dir) const {
  nlohmann::json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["seed"] = seed;
  j["input_hashes"] = input_hashes;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["output_dir"] = output_dir;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw data_error("cannot write manifest in " + dir);
  out << j.dump(2) << "\n";
}

void prepare_output_dir(const std::string& dir, bool force) {
  const fs::path p(dir);
  if (fs::exists(p)) {
    bool has_content = false;
    for (const auto& entry : fs::directory_iterator(p)) {
      const auto name = entry.path().filename().string();
      if (name == ".lock") continue;
      has_content = true;
      break;
    }
    if (has_content && !force)
      throw config_error("output directory '" + dir + "' is not empty (use --force)");
  } else {
    fs::create_directories(p);
  }
}

DirLock::DirLock(const std::string& dir) {
  path_ = (fs::path(dir) / ".lock").string();
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw config_error("output directory '" + dir + "' is locked by another run");
    throw data_error("cannot create lock file in '" + dir + "'");
  }
  ::close(fd);
}

DirLock::~DirLock() { std::remove(path_.c_str()); }

}  // namespace fusemil
