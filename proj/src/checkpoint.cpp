#include "trajgan/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "trajgan/error.hpp"

namespace trajgan {

using nlohmann::json;

namespace {

std::string shape_text(std::size_t r, std::size_t c) {
  return "[" + std::to_string(r) + ", " + std::to_string(c) + "]";
}

json params_json(const ParamSet& params) {
  json out = json::array();
  for (const auto& [name, t] : params.entries()) {
    out.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}, {"values", std::vector<double>(t.values().begin(), t.values().end())}});
  }
  return out;
}

json adam_json(const Adam& opt) {
  json out = json::array();
  for (const auto& s : opt.state()) out.push_back({{"t", s.t}, {"m", s.m}, {"v", s.v}});
  return out;
}

std::vector<AdamState> adam_from_json(const json& j, const ParamSet& params, const std::string& what) {
  if (!j.is_array() || j.size() != params.entries().size()) {
    throw ConfigError("checkpoint v" + std::to_string(kCheckpointVersion) + ": " + what +
                      " optimizer state does not match the parameter list");
  }
  std::vector<AdamState> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    AdamState s;
    s.t = j[i].at("t").get<std::uint64_t>();
    s.m = j[i].at("m").get<std::vector<double>>();
    s.v = j[i].at("v").get<std::vector<double>>();
    const std::size_t n = params.entries()[i].second.size();
    if (s.m.size() != n || s.v.size() != n) {
      throw ConfigError("checkpoint v" + std::to_string(kCheckpointVersion) + ": " + what +
                        " optimizer state for '" + params.entries()[i].first + "' has the wrong size");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

json checkpoint_to_json(const TrainingSession& session, const ExperimentConfig& config_in) {
  // The output location is not part of the model; leaving it out keeps the
  // bytes identical for the same experiment written to different places.
  ExperimentConfig config = config_in;
  config.output_dir.clear();
  const double best = session.best_val_ade();
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", to_json(config)},
          {"progress",
           {{"epochs_done", session.epochs_done()},
            {"steps_done", session.steps_done()},
            {"best_val_ade", std::isfinite(best) ? json(best) : json(nullptr)}}},
          {"generator", params_json(session.generator().params())},
          {"discriminator", params_json(session.discriminator().params())},
          {"optimizer",
           {{"generator", adam_json(session.generator_optimizer())},
            {"discriminator", adam_json(session.discriminator_optimizer())}}}};
}

void save_checkpoint(const std::filesystem::path& path, const TrainingSession& session,
                     const ExperimentConfig& config) {
  const std::string bytes = checkpoint_to_json(session, config).dump() + "\n";
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << bytes;
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void restore_params(ParamSet& params, const json& stored, const std::string& what) {
  const std::string tag = "checkpoint v" + std::to_string(kCheckpointVersion) + ": ";
  if (!stored.is_array()) throw ConfigError(tag + what + " parameters missing");
  if (stored.size() != params.entries().size()) {
    throw ConfigError(tag + what + " has " + std::to_string(stored.size()) + " parameters but the config expects " +
                      std::to_string(params.entries().size()));
  }
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const auto& [name, t] = params.entries()[i];
    const auto& e = stored[i];
    const std::string stored_name = e.at("name").get<std::string>();
    if (stored_name != name) {
      throw ConfigError(tag + what + " parameter " + std::to_string(i) + " is '" + stored_name + "', expected '" +
                        name + "'");
    }
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols()) {
      throw ConfigError(tag + "parameter '" + name + "' has shape " + e.at("shape").dump() +
                        " but the config expects " + shape_text(t.rows(), t.cols()));
    }
    const auto values = e.at("values").get<std::vector<double>>();
    if (values.size() != t.size()) throw ConfigError(tag + "parameter '" + name + "' has the wrong value count");
    auto dst = Tensor(t).mutable_values();
    std::copy(values.begin(), values.end(), dst.begin());
  }
}

LoadedCheckpoint checkpoint_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string()) != kCheckpointFormat) {
      throw ConfigError("not a trajgan checkpoint (missing format tag)");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ConfigError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    LoadedCheckpoint out;
    out.config = experiment_from_json(j.at("config"));
    out.session = std::make_unique<TrainingSession>(out.config.model, out.config.train);
    auto& s = *out.session;
    restore_params(s.generator().params(), j.at("generator"), "generator");
    restore_params(s.discriminator().params(), j.at("discriminator"), "discriminator");
    const auto& opt = j.at("optimizer");
    s.generator_optimizer().load_state(adam_from_json(opt.at("generator"), s.generator().params(), "generator"));
    s.discriminator_optimizer().load_state(
        adam_from_json(opt.at("discriminator"), s.discriminator().params(), "discriminator"));
    const auto& p = j.at("progress");
    const auto& best = p.at("best_val_ade");
    s.set_progress(p.at("epochs_done").get<std::size_t>(), p.at("steps_done").get<std::size_t>(),
                   best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>());
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace trajgan
