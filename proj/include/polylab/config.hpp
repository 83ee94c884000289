#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace polylab {

// Plain-text configuration document: one `key = value` per line, `#` starts a
// comment, lists are comma-separated. Used for kernel definitions and
// experiment configs.
class ConfigDoc {
 public:
  ConfigDoc() = default;

  static ConfigDoc parse(const std::string& text) {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": empty key");
      doc.values_[key] = value;
    }
    return doc;
  }

  static ConfigDoc load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> get_double(const std::string& key) const {
    auto s = get(key);
    if (!s) return std::nullopt;
    return std::stod(*s);
  }

  std::optional<long long> get_int(const std::string& key) const {
    auto s = get(key);
    if (!s) return std::nullopt;
    return std::stoll(*s);
  }

  std::optional<std::vector<double>> get_double_list(const std::string& key) const {
    auto s = get(key);
    if (!s) return std::nullopt;
    std::vector<double> out;
    std::istringstream in(*s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      const std::string t = trim(tok);
      if (!t.empty()) out.push_back(std::stod(t));
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

  // Canonical serialization (sorted keys); also the basis of the config hash.
  std::string canonical() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
    return out.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

// FNV-1a over the canonical form; identifies a run in the manifest.
inline std::uint64_t config_hash(const ConfigDoc& doc) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : doc.canonical()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace polylab
