#include "trajgan/experiment.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "trajgan/error.hpp"
#include "trajgan/report.hpp"

namespace trajgan {

namespace fs = std::filesystem;

namespace {

// Exclusive lock file, removed on destruction.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
    if (fd < 0) {
      throw IoError("output directory " + dir.string() + " is in use by another run (remove " + path_.string() +
                    " if that run is gone)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

nlohmann::json manifest(const std::string& command, const ExperimentConfig& config,
                        const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  nlohmann::json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config_hash"] = config_hash(config);
  m["seed"] = config.seed;
  m["inputs"] = file_checksums(inputs);
  m["outputs"] = file_checksums(outputs);
  return m;
}

void append_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string format_epoch_line(const EpochRecord& rec, std::size_t epochs, const std::vector<StepRecord>& steps) {
  double variety = 0.0, d = 0.0;
  std::size_t nd = 0;
  for (const auto& s : steps) {
    variety += s.variety;
    if (s.d_loss) d += *s.d_loss, ++nd;
  }
  const double n = static_cast<double>(std::max<std::size_t>(steps.size(), 1));
  std::ostringstream line;
  line << std::fixed << std::setprecision(4) << "epoch " << rec.epoch << '/' << epochs << "  variety "
       << variety / n;
  if (nd > 0) line << "  d_loss " << d / static_cast<double>(nd);
  line << "  val_ade " << rec.val_ade << "  val_fde " << rec.val_fde;
  return line.str();
}

std::vector<SceneWindow> pick_split(const DatasetSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "val") return split.val;
  if (name == "test") return split.test;
  if (name == "all") {
    std::vector<SceneWindow> all = split.train;
    all.insert(all.end(), split.val.begin(), split.val.end());
    all.insert(all.end(), split.test.begin(), split.test.end());
    return all;
  }
  throw ConfigError("unknown split '" + name + "' (expected train, val, test or all)");
}

}  // namespace

std::vector<fs::path> data_input_files(const ExperimentConfig& config) {
  std::vector<fs::path> files;
  const std::string root = resolved_data_root(config);
  switch (config.data.source) {
    case DataSource::synthetic:
      break;
    case DataSource::windows_csv:
      files.emplace_back(root);
      break;
    case DataSource::sdd: {
      std::error_code ec;
      if (!fs::is_directory(root, ec)) break;
      for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().filename() == "annotations.txt") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      break;
    }
  }
  return files;
}

ParseResult run_parse(const fs::path& root, const fs::path& output_csv, const SddOptions& options) {
  fs::path input = root;
  if (input.empty()) {
    const char* env = std::getenv(kDataRootEnv);
    if (!env || !*env) throw ConfigError(std::string("no input directory given and ") + kDataRootEnv + " is unset");
    input = env;
  }
  ParseResult result;
  result.dataset = load_sdd_directory(input, options);

  std::ostringstream csv;
  write_windows_csv(csv, result.dataset.windows);
  write_text_file(output_csv, csv.str());

  const fs::path dir = output_csv.parent_path();
  const std::string stem = output_csv.stem().string();
  std::ostringstream hist;
  write_histogram_csv(hist, result.dataset.tracks_per_class);
  write_text_file(dir / (stem + "_classes.csv"), hist.str());

  std::ostringstream summary;
  summary << result.dataset.windows.size() << " windows from " << result.dataset.scene_ids.size()
          << " videos\ntracks per class:\n"
          << format_histogram(result.dataset.tracks_per_class);
  result.summary = summary.str();

  ExperimentConfig cfg;
  cfg.data.source = DataSource::sdd;
  cfg.data.root = input.string();
  cfg.data.frame_stride = options.frame_stride;
  cfg.data.window_stride = options.windows.window_stride;
  cfg.model.t_obs = options.windows.t_obs;
  cfg.model.t_pred = options.windows.t_pred;
  ExperimentConfig plain = cfg;
  plain.data.root.clear();
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::recursive_directory_iterator(input)) {
    if (entry.is_regular_file() && entry.path().filename() == "annotations.txt") inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());
  nlohmann::json m = manifest("parse", plain, inputs, {output_csv, dir / (stem + "_classes.csv")});
  m["windows"] = result.dataset.windows.size();
  write_text_file(dir / (stem + "_manifest.json"), m.dump(2) + "\n");
  return result;
}

TrainResult run_train(const ExperimentConfig& config_in, const TrainOptions& options) {
  ExperimentConfig config = config_in;
  config.resolve();
  const fs::path dir = config.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  DirectoryLock lock(dir);

  const fs::path last = dir / "checkpoint_last.json";
  const fs::path best = dir / "checkpoint_best.json";
  const fs::path steps_csv = dir / "train_log.csv";
  const fs::path epochs_csv = dir / "epochs.csv";

  std::unique_ptr<TrainingSession> session;
  if (options.resume) {
    if (!fs::exists(last)) throw ConfigError("nothing to resume: " + last.string() + " does not exist");
    LoadedCheckpoint loaded = load_checkpoint(last);
    ExperimentConfig a = loaded.config, b = config;
    a.train.epochs = b.train.epochs = 0;
    a.output_dir = b.output_dir;
    if (!(a == b)) throw ConfigError("cannot resume: the config differs from the one stored in " + last.string());
    // Stored weights, optimizer state and progress; the epoch budget may grow.
    nlohmann::json j = checkpoint_to_json(*loaded.session, loaded.config);
    j["config"] = to_json(config);
    session = std::move(checkpoint_from_json(j).session);
  } else {
    if (fs::exists(last) && !options.overwrite) {
      throw ConfigError("output directory " + dir.string() + " already holds a run; resume it or allow overwriting");
    }
    for (const auto& f : {last, best, steps_csv, epochs_csv}) fs::remove(f, ec);
    session = std::make_unique<TrainingSession>(config.model, config.train);
    write_text_file(steps_csv, "step,epoch,d_loss,g_adv,variety,grad_norm_g,grad_norm_d,seconds\n");
    write_text_file(epochs_csv, "epoch,val_ade,val_fde\n");
  }
  save_config(dir / "config.resolved.json", config);

  const DatasetSplit split = load_split(config);
  std::vector<StepRecord> epoch_steps;
  TrainingHooks hooks;
  hooks.on_step = [&](const StepRecord& r) { epoch_steps.push_back(r); };
  hooks.on_best = [&](const TrainingSession& s, const EpochRecord&) { save_checkpoint(best, s, config); };
  hooks.on_epoch = [&](const TrainingSession& s, const EpochRecord& rec) {
    TrainLog chunk;
    chunk.steps = epoch_steps;
    chunk.epochs = {rec};
    std::ostringstream a, b;
    chunk.write_steps_csv(a, false);
    chunk.write_epochs_csv(b, false);
    append_text(steps_csv, a.str());
    append_text(epochs_csv, b.str());
    save_checkpoint(last, s, config);
    if (options.progress) options.progress(format_epoch_line(rec, config.train.epochs, epoch_steps));
    epoch_steps.clear();
  };
  run_training(*session, split, hooks);
  if (!fs::exists(last)) save_checkpoint(last, *session, config);
  if (!fs::exists(best)) save_checkpoint(best, *session, config);

  nlohmann::json m = manifest("train", config, data_input_files(config), {last, best, steps_csv, epochs_csv});
  m["epochs_done"] = session->epochs_done();
  m["steps_done"] = session->steps_done();
  m["windows"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");

  TrainResult result;
  result.output_dir = dir;
  result.epochs_done = session->epochs_done();
  result.steps_done = session->steps_done();
  result.best_val_ade = session->best_val_ade();
  return result;
}

EvalResult run_eval(const fs::path& checkpoint, const fs::path& out_dir, const EvalOptions& options) {
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint);
  ExperimentConfig config = loaded.config;
  if (options.data) config.data = *options.data;
  const std::vector<SceneWindow> windows = pick_split(load_split(config), options.split);
  if (windows.empty()) throw DataError("split '" + options.split + "' has no windows");

  const Generator& gen = loaded.session->generator();
  MinOfKOptions mk;
  mk.seed = options.seed.value_or(config.seed);
  const std::size_t k = options.k == 0 ? config.model.k_samples : options.k;

  EvalResult result;
  mk.k = 1;
  result.reports.push_back(eval_min_of_k(gen, windows, mk, config.name));
  if (k != 1) {
    mk.k = k;
    result.reports.push_back(eval_min_of_k(gen, windows, mk, config.name));
  }
  EvalReport cv = eval_constant_velocity(windows);
  cv.name = "constant velocity";
  result.reports.push_back(cv);
  result.table = format_eval_table(result.reports);

  const std::string base = "eval_" + options.split;
  std::ostringstream csv, per_class;
  write_eval_csv(csv, result.reports);
  write_per_class_csv(per_class, result.reports);
  const fs::path csv_path = out_dir / (base + ".csv");
  const fs::path class_path = out_dir / (base + "_per_class.csv");
  const fs::path text_path = out_dir / (base + ".txt");
  write_text_file(csv_path, csv.str());
  write_text_file(class_path, per_class.str());
  write_text_file(text_path, result.table);

  std::vector<fs::path> inputs = data_input_files(config);
  inputs.insert(inputs.begin(), checkpoint);
  nlohmann::json m = manifest("eval", config, inputs, {csv_path, class_path, text_path});
  m["split"] = options.split;
  m["k"] = k;
  m["noise_seed"] = mk.seed;
  write_text_file(out_dir / (base + "_manifest.json"), m.dump(2) + "\n");
  return result;
}

AnalysisResult analyze_generator(const Generator& generator) {
  AnalysisResult result;
  result.embeddings = class_embedding_matrix(generator);
  result.pca = pca_project(result.embeddings);
  result.distances = embedding_distances(result.embeddings);

  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  if (result.pca.zero_variance) s << "warning: class embeddings have zero variance\n";
  s << "PCA of class embeddings (explained variance " << result.pca.variance[0] << ", " << result.pca.variance[1]
    << "):\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    s << "  " << std::left << std::setw(14) << class_name(static_cast<int>(c)) << std::right << std::setw(10)
      << result.pca.coords[c][0] << std::setw(10) << result.pca.coords[c][1] << '\n';
  }
  s << "distance from pedestrian:\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (c == static_cast<std::size_t>(cls::pedestrian)) continue;
    s << "  " << std::left << std::setw(14) << class_name(static_cast<int>(c)) << std::right << std::setw(10)
      << result.distances[static_cast<std::size_t>(cls::pedestrian)][c] << '\n';
  }
  result.summary = s.str();
  return result;
}

AnalysisResult run_analyze(const fs::path& checkpoint, const fs::path& out_dir) {
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint);
  AnalysisResult result = analyze_generator(loaded.session->generator());

  std::ostringstream emb, pca, dist;
  emb << "class";
  for (std::size_t j = 0; j < result.embeddings.front().size(); ++j) emb << ",e" << j;
  emb << '\n' << std::setprecision(17);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    emb << '"' << class_name(static_cast<int>(c)) << '"';
    for (double v : result.embeddings[c]) emb << ',' << v;
    emb << '\n';
  }
  write_pca_csv(pca, result.pca);
  write_matrix_csv(dist, result.distances);

  std::vector<SvgPoint> points;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    points.push_back({std::string(class_name(static_cast<int>(c))), result.pca.coords[c][0], result.pca.coords[c][1]});
  }
  std::vector<std::pair<std::string, double>> bars;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (c == static_cast<std::size_t>(cls::pedestrian)) continue;
    bars.emplace_back(std::string(class_name(static_cast<int>(c))),
                      result.distances[static_cast<std::size_t>(cls::pedestrian)][c]);
  }

  const std::vector<fs::path> outputs{out_dir / "embeddings.csv", out_dir / "pca.csv", out_dir / "distances.csv",
                                      out_dir / "pca.svg", out_dir / "pedestrian_distances.svg"};
  write_text_file(outputs[0], emb.str());
  write_text_file(outputs[1], pca.str());
  write_text_file(outputs[2], dist.str());
  write_text_file(outputs[3], svg_scatter("Class embeddings, first two principal components", points));
  write_text_file(outputs[4], svg_bars("Embedding distance from pedestrian", bars));

  nlohmann::json m = manifest("analyze", loaded.config, {checkpoint}, outputs);
  m["zero_variance"] = result.pca.zero_variance;
  write_text_file(out_dir / "analyze_manifest.json", m.dump(2) + "\n");
  return result;
}

}  // namespace trajgan
