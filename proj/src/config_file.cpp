#include "pase/config_file.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pase/common.hpp"

namespace pase {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& s) {
  for (size_t i = 0; i < s.size(); ++i)
    if (s[i] == '#' || s[i] == ';') return s.substr(0, i);
  return s;
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text,
                                    const std::string& origin) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw UsageError(origin + ":" + std::to_string(lineno) +
                         ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!cfg.find(section)) cfg.sections_.push_back({section, {}});
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(origin + ":" + std::to_string(lineno) +
                       ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw UsageError(origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.set(section, key, value);
  }
  return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

std::string ConfigFile::serialize() const {
  std::string out;
  for (const auto& sec : sections_) {
    if (!sec.name.empty()) out += "[" + sec.name + "]\n";
    for (const auto& [k, v] : sec.entries) out += k + " = " + v + "\n";
  }
  return out;
}

ConfigFile::Section* ConfigFile::find(const std::string& name) {
  for (auto& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

const ConfigFile::Section* ConfigFile::find(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  const Section* s = find(section);
  if (!s) return false;
  for (const auto& [k, v] : s->entries)
    if (k == key) return true;
  return false;
}

const std::string& ConfigFile::get(const std::string& section,
                                   const std::string& key) const {
  const Section* s = find(section);
  if (s)
    for (const auto& [k, v] : s->entries)
      if (k == key) return v;
  throw UsageError("missing config key [" + section + "] " + key);
}

std::string ConfigFile::get_or(const std::string& section,
                               const std::string& key,
                               const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

double ConfigFile::get_double(const std::string& section,
                              const std::string& key) const {
  const std::string& v = get(section, key);
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.c_str(), &end);
  if (errno != 0 || end == v.c_str() || *end != '\0')
    throw UsageError("config key [" + section + "] " + key +
                     " is not a number: " + v);
  return x;
}

long ConfigFile::get_long(const std::string& section,
                          const std::string& key) const {
  const std::string& v = get(section, key);
  char* end = nullptr;
  errno = 0;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (errno != 0 || end == v.c_str() || *end != '\0')
    throw UsageError("config key [" + section + "] " + key +
                     " is not an integer: " + v);
  return x;
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     const std::string& value) {
  Section* s = find(section);
  if (!s) {
    sections_.push_back({section, {}});
    s = &sections_.back();
  }
  for (auto& [k, v] : s->entries)
    if (k == key) {
      v = value;
      return;
    }
  s->entries.emplace_back(key, value);
}

void ConfigFile::set_double(const std::string& section, const std::string& key,
                            double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  set(section, key, buf);
}

void ConfigFile::set_long(const std::string& section, const std::string& key,
                          long value) {
  set(section, key, std::to_string(value));
}

std::vector<std::pair<std::string, std::string>> ConfigFile::keys() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sections_)
    for (const auto& [k, v] : s.entries) out.emplace_back(s.name, k);
  return out;
}

}  // namespace pase
