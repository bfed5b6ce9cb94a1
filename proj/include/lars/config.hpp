#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lars {

// Flat `key = value` configuration. Every key must be one of the known
// keys (see known_config_keys); unknown keys are rejected.
class ExperimentConfig {
 public:
  // All known keys with their default values.
  ExperimentConfig();

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  // Applies one `key=value` override.
  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  // Comma-separated list of positive integers; empty value -> empty list.
  std::vector<std::size_t> get_sizes(const std::string& key) const;

  // Sorted `key = value` lines; parse(serialize()) reproduces the config.
  std::string serialize() const;
  // FNV-1a over serialize(), hex.
  std::string hash() const;

  const std::map<std::string, std::string>& values() const { return values_; }
  bool operator==(const ExperimentConfig&) const = default;

 private:
  std::map<std::string, std::string> values_;
};

const std::map<std::string, std::string>& known_config_keys();

}  // namespace lars
