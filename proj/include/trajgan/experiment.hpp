#pragma once

// End-to-end commands: parse a dataset, train, evaluate and analyze. Every
// command writes a manifest (config hash, seed, input checksums) beside its
// outputs.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trajgan/checkpoint.hpp"
#include "trajgan/config.hpp"
#include "trajgan/eval.hpp"

namespace trajgan {

inline constexpr const char* kVersion = "1.0.0";

using LineSink = std::function<void(const std::string&)>;

struct ParseResult {
  LoadedDataset dataset;
  std::string summary;  // class histogram as text
};

// Reads root/<scene>/<video>/annotations.txt (root empty: the data root
// variable) and writes the window CSV plus "<stem>_classes.csv" and
// "<stem>_manifest.json" next to it.
ParseResult run_parse(const std::filesystem::path& root, const std::filesystem::path& output_csv,
                      const SddOptions& options = {});

struct TrainOptions {
  bool resume = false;     // continue from checkpoint_last.json in the output directory
  bool overwrite = false;  // replace an existing finished or partial run
  LineSink progress;
};

struct TrainResult {
  std::filesystem::path output_dir;
  std::size_t epochs_done = 0;
  std::size_t steps_done = 0;
  double best_val_ade = 0.0;
};

// Output directory layout: config.resolved.json, train_log.csv, epochs.csv,
// checkpoint_last.json, checkpoint_best.json, manifest.json. A ".lock" file
// guards against two runs sharing a directory.
TrainResult run_train(const ExperimentConfig& config, const TrainOptions& options = {});

struct EvalOptions {
  std::string split = "test";  // train, val, test or all
  std::size_t k = 0;           // 0: the model's k_samples
  std::optional<std::uint64_t> seed;  // noise seed; default: the run seed
  std::optional<DataConfig> data;     // default: the checkpoint's data section
};

struct EvalResult {
  std::vector<EvalReport> reports;  // model at k=1, model at k, constant velocity
  std::string table;
};

// Writes eval_<split>.csv, eval_<split>_per_class.csv, eval_<split>.txt and
// eval_<split>_manifest.json into out_dir.
EvalResult run_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& out_dir,
                    const EvalOptions& options = {});

struct AnalysisResult {
  std::vector<std::vector<double>> embeddings;  // 6 x d
  PcaResult pca;
  std::vector<std::vector<double>> distances;   // 6 x 6
  std::string summary;
};

AnalysisResult analyze_generator(const Generator& generator);

// Writes embeddings.csv, pca.csv, distances.csv, pca.svg,
// pedestrian_distances.svg and analyze_manifest.json. Throws
// UnavailableError for models trained without labels.
AnalysisResult run_analyze(const std::filesystem::path& checkpoint, const std::filesystem::path& out_dir);

// Files read by load_windows for this config, sorted.
std::vector<std::filesystem::path> data_input_files(const ExperimentConfig& config);

}  // namespace trajgan
