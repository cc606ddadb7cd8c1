#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trajgan/trajgan.h"

namespace fs = std::filesystem;

namespace {

int report(tg_status status) {
  if (status != TG_OK) std::cerr << "error (" << tg_status_name(status) << "): " << tg_last_error() << '\n';
  return static_cast<int>(status);
}

void print_and_free(char* text) {
  if (!text) return;
  std::cout << text;
  tg_string_free(text);
}

struct ConfigHandle {
  tg_config* ptr = nullptr;
  ~ConfigHandle() { tg_config_free(ptr); }
};

// Loads --config (or defaults), then applies --set, --seed and --out.
tg_status build_config(ConfigHandle& cfg, const std::string& path, const std::vector<std::string>& sets,
                       const std::optional<std::uint64_t>& seed, const std::string& out) {
  tg_status st = path.empty() ? tg_config_new(&cfg.ptr) : tg_config_load(path.c_str(), &cfg.ptr);
  if (st != TG_OK) return st;
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
      return TG_ERR_ARGUMENT;
    }
    st = tg_config_set(cfg.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (st != TG_OK) return st;
  }
  if (seed) {
    st = tg_config_set(cfg.ptr, "seed", std::to_string(*seed).c_str());
    if (st != TG_OK) return st;
  }
  if (!out.empty()) {
    st = tg_config_set(cfg.ptr, "output_dir", ("\"" + out + "\"").c_str());
    if (st != TG_OK) return st;
  }
  return TG_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-aware trajectory prediction: parse, train, evaluate and analyze."};
  app.set_version_flag("--version", std::string(tg_version()));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;

  auto* parse = app.add_subcommand("parse", "Turn a Stanford Drone annotation tree into a window CSV");
  std::string input_dir;
  std::int64_t frame_stride = 12;
  parse->add_option("input", input_dir, "Dataset root (default: $TRAJGAN_DATA_ROOT)");
  parse->add_option("--out", out, "Output CSV")->default_str("windows.csv");
  parse->add_option("--frame-stride", frame_stride, "Keep every n-th frame")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train a model from a config file");
  bool resume = false, force = false;
  train->add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Override the config seed");
  train->add_option("--out", out, "Override the output directory");
  train->add_option("--set", sets, "Override one key, e.g. train.epochs=5")->take_all();
  train->add_flag("--resume", resume, "Continue from checkpoint_last.json");
  train->add_flag("--force", force, "Replace an existing run in the output directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string checkpoint, split = "test";
  std::size_t k = 0;
  eval->add_option("checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split, "train, val, test or all")->capture_default_str();
  eval->add_option("-k", k, "Samples per agent (default: the model's k)");
  eval->add_option("--config", config_path, "Take the data section from this config")->check(CLI::ExistingFile);
  eval->add_option("--set", sets, "Override one data key, e.g. data.root=/data")->take_all();
  eval->add_option("--seed", seed, "Noise seed (default: the run seed)");
  eval->add_option("--out", out, "Output directory (default: next to the checkpoint)");

  auto* analyze = app.add_subcommand("analyze", "PCA and distances of the learned class embeddings");
  analyze->add_option("checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", out, "Output directory (default: next to the checkpoint)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(TG_ERR_ARGUMENT);
  }

  if (parse->parsed()) {
    char* summary = nullptr;
    const fs::path csv = out.empty() ? fs::path("windows.csv") : fs::path(out);
    const tg_status st = tg_run_parse(input_dir.empty() ? nullptr : input_dir.c_str(), csv.c_str(), frame_stride,
                                      &summary);
    if (st == TG_OK) std::cout << "wrote " << csv.string() << '\n';
    print_and_free(summary);
    return report(st);
  }

  if (train->parsed()) {
    ConfigHandle cfg;
    tg_status st = build_config(cfg, config_path, sets, seed, out);
    if (st != TG_OK) return report(st);
    char* json = nullptr;
    if ((st = tg_config_to_json(cfg.ptr, &json)) != TG_OK) return report(st);
    std::cout << "resolved config:\n";
    print_and_free(json);
    std::cout << '\n';
    auto progress = [](const char* line, void*) { std::cout << line << std::endl; };
    return report(tg_run_train(cfg.ptr, resume, force, progress, nullptr));
  }

  if (eval->parsed()) {
    ConfigHandle cfg;
    const bool custom_data = !config_path.empty() || !sets.empty();
    if (custom_data) {
      const tg_status st = build_config(cfg, config_path, sets, std::nullopt, "");
      if (st != TG_OK) return report(st);
    }
    const fs::path dir = out.empty() ? fs::path(checkpoint).parent_path() : fs::path(out);
    char* table = nullptr;
    const tg_status st = tg_run_eval(checkpoint.c_str(), dir.empty() ? "." : dir.c_str(), split.c_str(), k,
                                     custom_data ? cfg.ptr : nullptr, seed.has_value(), seed.value_or(0), &table);
    print_and_free(table);
    return report(st);
  }

  if (analyze->parsed()) {
    const fs::path dir = out.empty() ? fs::path(checkpoint).parent_path() : fs::path(out);
    char* summary = nullptr;
    const tg_status st = tg_run_analyze(checkpoint.c_str(), dir.empty() ? "." : dir.c_str(), &summary);
    print_and_free(summary);
    return report(st);
  }
  return static_cast<int>(TG_ERR_ARGUMENT);
}
