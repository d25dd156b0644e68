#include "gectl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>

#include "gectl/errors.hpp"

namespace gectl {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double ParseNumber(const std::string& text, const std::string& key, int line) {
  const std::string t = Trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("expected a number, got '" + t + "'", key, line);
  }
  return v;
}

}  // namespace

std::vector<double> ParseNumberList(const std::string& text, const std::string& key,
                                    int line) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    out.push_back(ParseNumber(item, key, line));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

KeyValueConfig KeyValueConfig::Parse(std::istream& is,
                                     const std::set<std::string>& repeatable) {
  KeyValueConfig cfg;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = Trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected 'key = value'", "", line);
    }
    const std::string key = Trim(text.substr(0, eq));
    const std::string value = Trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", "", line);
    if (cfg.Find(key) != nullptr && repeatable.count(key) == 0) {
      throw ConfigError("duplicate key (first on line " +
                            std::to_string(cfg.Find(key)->line) + ")",
                        key, line);
    }
    cfg.entries_.push_back({key, value, line});
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::Load(const std::filesystem::path& path,
                                    const std::set<std::string>& repeatable) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return Parse(in, repeatable);
}

void KeyValueConfig::Set(const std::string& key, const std::string& value) {
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                [&](const Entry& e) { return e.key == key; }),
                 entries_.end());
  entries_.push_back({key, value, 0});
}

const KeyValueConfig::Entry* KeyValueConfig::Find(const std::string& key) const {
  for (const Entry& e : entries_) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

bool KeyValueConfig::Has(const std::string& key) const { return Find(key) != nullptr; }

std::string KeyValueConfig::GetString(const std::string& key, const std::string& def) const {
  const Entry* e = Find(key);
  return e ? e->value : def;
}

double KeyValueConfig::GetDouble(const std::string& key, double def) const {
  const Entry* e = Find(key);
  return e ? ParseNumber(e->value, key, e->line) : def;
}

long KeyValueConfig::GetInt(const std::string& key, long def) const {
  const Entry* e = Find(key);
  if (!e) return def;
  long v = 0;
  const std::string& t = e->value;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("expected an integer, got '" + t + "'", key, e->line);
  }
  return v;
}

std::uint64_t KeyValueConfig::GetU64(const std::string& key) const {
  const Entry* e = Find(key);
  if (!e) throw ConfigError("required key is missing", key);
  std::uint64_t v = 0;
  const std::string& t = e->value;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("expected an unsigned integer, got '" + t + "'", key, e->line);
  }
  return v;
}

bool KeyValueConfig::GetBool(const std::string& key, bool def) const {
  const Entry* e = Find(key);
  if (!e) return def;
  const std::string& v = e->value;
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError("expected a boolean, got '" + v + "'", key, e->line);
}

Vec3 KeyValueConfig::GetVec3(const std::string& key, const Vec3& def) const {
  const Entry* e = Find(key);
  if (!e) return def;
  const std::vector<double> v = ParseNumberList(e->value, key, e->line);
  if (v.size() != 3) throw ConfigError("expected three numbers", key, e->line);
  return {v[0], v[1], v[2]};
}

std::vector<double> KeyValueConfig::GetList(const Entry& e) const {
  return ParseNumberList(e.value, e.key, e.line);
}

std::vector<KeyValueConfig::Entry> KeyValueConfig::All(const std::string& key) const {
  std::vector<Entry> out;
  for (const Entry& e : entries_) {
    if (e.key == key) out.push_back(e);
  }
  return out;
}

void KeyValueConfig::RequireKnown(const std::set<std::string>& known) const {
  for (const Entry& e : entries_) {
    if (known.count(e.key) == 0) throw ConfigError("unknown key", e.key, e.line);
  }
}

}  // namespace gectl
