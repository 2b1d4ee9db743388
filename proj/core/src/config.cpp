#include "cbs/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cbs/common.hpp"

namespace cbs {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in) {
  ConfigFile cfg;
  std::string line, section;
  std::vector<std::string> bad_lines;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3) {
        bad_lines.push_back("line " + std::to_string(lineno) + ": malformed section header");
        continue;
      }
      section = trim(text.substr(1, text.size() - 2));
      if (std::find(cfg.sections_.begin(), cfg.sections_.end(), section) == cfg.sections_.end())
        cfg.sections_.push_back(section);
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      bad_lines.push_back("line " + std::to_string(lineno) + ": expected key=value");
      continue;
    }
    const std::string key = trim(text.substr(0, eq));
    if (key.empty()) {
      bad_lines.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    cfg.values_[section.empty() ? key : section + "." + key] = trim(text.substr(eq + 1));
  }
  if (!bad_lines.empty()) {
    std::string msg = "config errors:";
    for (const auto& b : bad_lines) msg += "\n  " + b;
    throw ConfigError(msg);
  }
  return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse(in);
}

bool ConfigFile::has(const std::string& key) const { return values_.count(key) > 0; }

std::string ConfigFile::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config key: " + key);
  return it->second;
}

std::string ConfigFile::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long long ConfigFile::get_int(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not an integer: " + it->second);
  }
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not a number: " + it->second);
  }
}

uint64_t ConfigFile::get_seed(const std::string& key, uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not a seed: " + it->second);
  }
}

void ConfigFile::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::vector<std::string> ConfigFile::section_names() const { return sections_; }

std::vector<std::string> split_list(const std::string& text, char delimiter) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, delimiter)) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace cbs
