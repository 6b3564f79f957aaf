#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fusemil/common.hpp"

namespace fusemil {

/// Flat key = value config file. Lines starting with '#' and blank lines are
/// ignored; values keep internal whitespace. Unknown keys are rejected by the
/// typed readers so typos surface as config errors.
class KeyVal {
 public:
  static KeyVal parse_file(const std::string& path);
  static KeyVal parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  /// Comma-separated lists.
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::vector<std::string>& fallback) const;

  /// Throws config_error if any key is outside `known`.
  void require_known_keys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fusemil
