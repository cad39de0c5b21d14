#pragma once

#include <string>
#include <utility>
#include <vector>

namespace pase {

/// Sectioned key/value config. Lines are `key = value` under `[section]`
/// headers; '#' and ';' start comments; whitespace is trimmed. Insertion
/// order is preserved so serialize() is deterministic.
class ConfigFile {
 public:
  static ConfigFile parse_string(const std::string& text,
                                 const std::string& origin = "<string>");
  static ConfigFile parse_file(const std::string& path);

  std::string serialize() const;

  bool has(const std::string& section, const std::string& key) const;
  const std::string& get(const std::string& section,
                         const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  long get_long(const std::string& section, const std::string& key) const;

  void set(const std::string& section, const std::string& key,
           const std::string& value);
  void set_double(const std::string& section, const std::string& key,
                  double value);
  void set_long(const std::string& section, const std::string& key, long value);

  /// Every (section, key) pair in file order.
  std::vector<std::pair<std::string, std::string>> keys() const;

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };
  std::vector<Section> sections_;

  Section* find(const std::string& name);
  const Section* find(const std::string& name) const;
};

}  // namespace pase
