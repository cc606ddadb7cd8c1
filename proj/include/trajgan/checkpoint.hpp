#pragma once

// Versioned JSON checkpoints: resolved config, progress, both parameter sets
// and both optimizer states. Writing the same session twice gives the same bytes.

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "trajgan/config.hpp"
#include "trajgan/train.hpp"

namespace trajgan {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "trajgan-checkpoint";

nlohmann::json checkpoint_to_json(const TrainingSession& session, const ExperimentConfig& config);
void save_checkpoint(const std::filesystem::path& path, const TrainingSession& session,
                     const ExperimentConfig& config);

struct LoadedCheckpoint {
  ExperimentConfig config;
  std::unique_ptr<TrainingSession> session;
};

// Throws ConfigError on a format, version or shape mismatch.
LoadedCheckpoint checkpoint_from_json(const nlohmann::json& j);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Copies stored values into `params`; every name and shape must match.
void restore_params(ParamSet& params, const nlohmann::json& stored, const std::string& what);

}  // namespace trajgan
