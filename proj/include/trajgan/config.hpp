#pragma once

// Experiment configuration: one JSON document holding model, training and
// data settings. Unknown keys are rejected; missing keys take defaults.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajgan/data.hpp"
#include "trajgan/model.hpp"
#include "trajgan/train.hpp"

namespace trajgan {

enum class DataSource { synthetic, sdd, windows_csv };

std::string to_string(DataSource source);
DataSource data_source_from_string(const std::string& name);

struct SynthDataConfig {
  std::vector<std::string> kinds{"linear"};
  std::size_t scenes = 120;
  std::size_t agents_per_scene = 3;
  std::vector<int> classes;  // empty: all six
  double jitter = 0.05;
  double base_speed = 1.0;
  std::size_t frames = 0;  // 0: one window per scene

  bool operator==(const SynthDataConfig&) const = default;
};

struct DataConfig {
  DataSource source = DataSource::synthetic;
  std::string root;  // sdd directory or windows CSV; TRAJGAN_DATA_ROOT overrides
  std::int64_t frame_stride = 12;
  std::size_t window_stride = 1;
  SynthDataConfig synthetic;

  bool operator==(const DataConfig&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::string output_dir = "runs/experiment";
  ModelConfig model;
  TrainConfig train;
  DataConfig data;

  // Propagates `seed` into model init and training streams and validates.
  void resolve();
  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
// Throws ConfigError naming the offending key.
ExperimentConfig experiment_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

// Sets a dotted key ("train.epochs") from text; the value is read as JSON
// when it parses, otherwise as a string.
void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value);

// FNV-1a over the canonical JSON dump without output_dir, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);
std::string fnv1a_hex(std::string_view bytes);

inline constexpr const char* kDataRootEnv = "TRAJGAN_DATA_ROOT";

// data.root, unless the environment variable is set and non-empty.
std::string resolved_data_root(const ExperimentConfig& config);

// Windows for the configured data source, then the seeded 8:1:1 split.
std::vector<SceneWindow> load_windows(const ExperimentConfig& config);
DatasetSplit load_split(const ExperimentConfig& config);

}  // namespace trajgan
