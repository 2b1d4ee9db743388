#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace cbs {

// Flat key=value configuration with [section] headers. Keys are stored as
// "section.key"; values keep their raw text until typed access.
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in);
  static ConfigFile parse_file(const std::string& path);

  bool has(const std::string& key) const;
  std::string require(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  uint64_t get_seed(const std::string& key, uint64_t fallback) const;

  void set(const std::string& key, const std::string& value);
  std::vector<std::string> section_names() const;  // in first-appearance order
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> sections_;
};

// "a, b ,c" -> {"a","b","c"}; empty input -> empty list.
std::vector<std::string> split_list(const std::string& text, char delimiter = ',');

}  // namespace cbs
