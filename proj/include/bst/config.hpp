#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bst/resmlp.hpp"

namespace bst {

/// Flat `key = value` text grouped under `[section]` headers. `#` starts a
/// comment. Grammar in docs/formats.md.
class ConfigFile {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;  // 0 for values set programmatically
  };

  static ConfigFile parse(const std::string& text, const std::string& source = "<string>");
  static ConfigFile load(const std::string& path);

  /// "section.key=value"
  void set_override(const std::string& assignment);
  void set(const std::string& section, const std::string& key, std::string value);

  const Entry* find(const std::string& section, const std::string& key) const;
  bool has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }
  const std::string& source() const { return source_; }
  const std::map<std::string, std::map<std::string, Entry>>& sections() const { return sections_; }

 private:
  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

struct OptimConfig {
  std::string name = "sgd";  // sgd | adam
  float lr = 0.05f;
  float momentum = 0.9f;
  float weight_decay = 0.0f;
  std::string schedule = "constant";  // constant | cosine
};

struct TrainSettings {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct DataConfig {
  std::string source = "synthetic";  // synthetic | cifar10 | cifar100
  std::string path;
  std::size_t train_samples = 4000;
  std::size_t test_samples = 1000;
  float noise = 1.0f;
  std::size_t blobs_per_class = 3;
};

struct RunConfig {
  ModelConfig model;
  OptimConfig optim;
  TrainSettings train;
  DataConfig data;

  /// Canonical single-line `section.key=value;...` echo of every setting.
  std::string echo() const;
};

/// Validates keys and values; errors carry the source name and line.
RunConfig run_config_from(const ConfigFile& file);
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});
RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides = {});

/// Comma-separated list helpers for CLI flags.
std::vector<double> parse_double_list(const std::string& text, const std::string& what);
std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what);

}  // namespace bst
