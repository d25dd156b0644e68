#ifndef GECTL_CONFIG_HPP_
#define GECTL_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gectl/math.hpp"

namespace gectl {

/// Flat `key = value` text. `#` starts a comment; blank lines are ignored.
/// A key may appear once unless listed as repeatable. Every accessor that
/// fails throws ConfigError carrying the key and the line it came from.
class KeyValueConfig {
 public:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;  // 0 for programmatic overrides
  };

  static KeyValueConfig Parse(std::istream& is,
                              const std::set<std::string>& repeatable = {});
  static KeyValueConfig Load(const std::filesystem::path& path,
                             const std::set<std::string>& repeatable = {});

  // Replaces every occurrence of `key`.
  void Set(const std::string& key, const std::string& value);
  // Adds an entry as-is, keeping its line number.
  void Append(const Entry& e) { entries_.push_back(e); }
  bool Has(const std::string& key) const;

  std::string GetString(const std::string& key, const std::string& def) const;
  double GetDouble(const std::string& key, double def) const;
  long GetInt(const std::string& key, long def) const;
  std::uint64_t GetU64(const std::string& key) const;  // required
  bool GetBool(const std::string& key, bool def) const;
  Vec3 GetVec3(const std::string& key, const Vec3& def) const;
  std::vector<double> GetList(const Entry& e) const;
  std::vector<Entry> All(const std::string& key) const;

  // Throws ConfigError on the first key not in `known`.
  void RequireKnown(const std::set<std::string>& known) const;

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  const Entry* Find(const std::string& key) const;
  std::vector<Entry> entries_;
};

std::vector<double> ParseNumberList(const std::string& text, const std::string& key,
                                    int line);

}  // namespace gectl

#endif  // GECTL_CONFIG_HPP_
