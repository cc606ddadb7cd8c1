#include "trajgan/trajgan.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <stdexcept>
#include <string>

#include "trajgan/experiment.hpp"
#include "trajgan/error.hpp"

struct tg_config {
  trajgan::ExperimentConfig value;
};

struct tg_model {
  trajgan::ExperimentConfig config;
  std::unique_ptr<trajgan::TrainingSession> session;
};

namespace {

thread_local std::string g_last_error;

tg_status fail(tg_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
tg_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return TG_OK;
  } catch (const trajgan::ConfigError& e) {
    return fail(TG_ERR_CONFIG, e.what());
  } catch (const trajgan::DataError& e) {
    return fail(TG_ERR_DATA, e.what());
  } catch (const trajgan::NumericError& e) {
    return fail(TG_ERR_NUMERIC, e.what());
  } catch (const trajgan::UnavailableError& e) {
    return fail(TG_ERR_UNAVAILABLE, e.what());
  } catch (const trajgan::IoError& e) {
    return fail(TG_ERR_IO, e.what());
  } catch (const trajgan::ContractError& e) {
    return fail(TG_ERR_CONTRACT, e.what());
  } catch (const trajgan::DimensionError& e) {
    return fail(TG_ERR_CONTRACT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(TG_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(TG_ERR_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(TG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(TG_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

#define TG_CHECK_ARG(cond, msg) \
  if (!(cond)) return fail(TG_ERR_ARGUMENT, msg)

extern "C" {

const char* tg_version(void) { return trajgan::kVersion; }

const char* tg_last_error(void) { return g_last_error.c_str(); }

const char* tg_status_name(tg_status status) {
  switch (status) {
    case TG_OK: return "ok";
    case TG_ERR_ARGUMENT: return "invalid argument";
    case TG_ERR_CONFIG: return "config error";
    case TG_ERR_DATA: return "data error";
    case TG_ERR_NUMERIC: return "numeric error";
    case TG_ERR_CONTRACT: return "contract violation";
    case TG_ERR_UNAVAILABLE: return "unavailable";
    case TG_ERR_IO: return "i/o error";
    case TG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void tg_string_free(char* text) { std::free(text); }

tg_status tg_config_new(tg_config** out) {
  TG_CHECK_ARG(out, "out is null");
  return guarded([&] { *out = new tg_config{}; });
}

tg_status tg_config_load(const char* path, tg_config** out) {
  TG_CHECK_ARG(path && out, "path and out are required");
  return guarded([&] { *out = new tg_config{trajgan::load_config(path)}; });
}

void tg_config_free(tg_config* config) { delete config; }

tg_status tg_config_set(tg_config* config, const char* key, const char* value) {
  TG_CHECK_ARG(config && key && value, "config, key and value are required");
  return guarded([&] { trajgan::apply_override(config->value, key, value); });
}

tg_status tg_config_to_json(const tg_config* config, char** out_json) {
  TG_CHECK_ARG(config && out_json, "config and out_json are required");
  return guarded([&] { *out_json = copy_string(trajgan::to_json(config->value).dump(2)); });
}

tg_status tg_config_save(const tg_config* config, const char* path) {
  TG_CHECK_ARG(config && path, "config and path are required");
  return guarded([&] { trajgan::save_config(path, config->value); });
}

tg_status tg_config_hash(const tg_config* config, char** out_hash) {
  TG_CHECK_ARG(config && out_hash, "config and out_hash are required");
  return guarded([&] { *out_hash = copy_string(trajgan::config_hash(config->value)); });
}

tg_status tg_run_parse(const char* input_dir, const char* output_csv, int64_t frame_stride, char** out_summary) {
  TG_CHECK_ARG(output_csv, "output_csv is required");
  TG_CHECK_ARG(frame_stride > 0, "frame_stride must be positive");
  return guarded([&] {
    trajgan::SddOptions opts;
    opts.frame_stride = frame_stride;
    const auto result = trajgan::run_parse(input_dir ? input_dir : "", output_csv, opts);
    if (out_summary) *out_summary = copy_string(result.summary);
  });
}

tg_status tg_run_train(const tg_config* config, int resume, int overwrite, tg_line_fn progress, void* user) {
  TG_CHECK_ARG(config, "config is required");
  return guarded([&] {
    trajgan::TrainOptions opts;
    opts.resume = resume != 0;
    opts.overwrite = overwrite != 0;
    if (progress) opts.progress = [&](const std::string& line) { progress(line.c_str(), user); };
    trajgan::run_train(config->value, opts);
  });
}

tg_status tg_run_eval(const char* checkpoint, const char* out_dir, const char* split, size_t k,
                      const tg_config* data_config, int has_seed, uint64_t seed, char** out_table) {
  TG_CHECK_ARG(checkpoint && out_dir, "checkpoint and out_dir are required");
  return guarded([&] {
    trajgan::EvalOptions opts;
    if (split) opts.split = split;
    opts.k = k;
    if (data_config) opts.data = data_config->value.data;
    if (has_seed) opts.seed = seed;
    const auto result = trajgan::run_eval(checkpoint, out_dir, opts);
    if (out_table) *out_table = copy_string(result.table);
  });
}

tg_status tg_run_analyze(const char* checkpoint, const char* out_dir, char** out_summary) {
  TG_CHECK_ARG(checkpoint && out_dir, "checkpoint and out_dir are required");
  return guarded([&] {
    const auto result = trajgan::run_analyze(checkpoint, out_dir);
    if (out_summary) *out_summary = copy_string(result.summary);
  });
}

tg_status tg_model_load(const char* checkpoint, tg_model** out) {
  TG_CHECK_ARG(checkpoint && out, "checkpoint and out are required");
  return guarded([&] {
    auto loaded = trajgan::load_checkpoint(checkpoint);
    *out = new tg_model{std::move(loaded.config), std::move(loaded.session)};
  });
}

void tg_model_free(tg_model* model) { delete model; }

tg_status tg_model_shape(const tg_model* model, size_t* t_obs, size_t* t_pred, size_t* k_samples) {
  TG_CHECK_ARG(model, "model is null");
  const auto& m = model->config.model;
  if (t_obs) *t_obs = m.t_obs;
  if (t_pred) *t_pred = m.t_pred;
  if (k_samples) *k_samples = m.k_samples;
  return TG_OK;
}

tg_status tg_model_predict(const tg_model* model, size_t n_agents, const double* observed, const int* labels,
                           size_t k, uint64_t seed, double* out) {
  TG_CHECK_ARG(model && observed && labels && out, "model, observed, labels and out are required");
  TG_CHECK_ARG(n_agents > 0 && k > 0, "n_agents and k must be positive");
  return guarded([&] {
    const auto& m = model->config.model;
    trajgan::SceneWindow window;
    window.scene_id = "capi";
    for (size_t i = 0; i < n_agents; ++i) {
      require(labels[i] >= 0 && labels[i] < static_cast<int>(trajgan::kNumClasses), "label out of range");
      trajgan::WindowAgent a;
      a.agent_id = static_cast<std::int64_t>(i);
      a.label = labels[i];
      for (size_t t = 0; t < m.t_obs; ++t) {
        const double* p = observed + (i * m.t_obs + t) * 2;
        a.observed.push_back({p[0], p[1]});
      }
      const trajgan::Point last = a.observed.back();
      a.future.assign(m.t_pred, last);  // unused by the generator
      window.agents.push_back(std::move(a));
    }
    const std::vector<trajgan::SceneWindow> windows{window};
    const trajgan::Batch batch = trajgan::make_batch(windows, m.t_obs, m.t_pred);
    trajgan::Rng rng(seed);
    trajgan::NoGradGuard no_grad;
    const trajgan::PredictionSet pred = model->session->generator().forward(batch, k, rng);
    for (size_t s = 0; s < k; ++s)
      for (size_t i = 0; i < n_agents; ++i) {
        const auto traj = pred.trajectory(i, s);
        for (size_t t = 0; t < m.t_pred; ++t) {
          double* dst = out + ((s * n_agents + i) * m.t_pred + t) * 2;
          dst[0] = traj[t].x;
          dst[1] = traj[t].y;
        }
      }
  });
}

tg_status tg_model_class_embeddings(const tg_model* model, double* out, size_t capacity, size_t* dim) {
  TG_CHECK_ARG(model && dim, "model and dim are required");
  return guarded([&] {
    const auto rows = trajgan::class_embedding_matrix(model->session->generator());
    *dim = rows.front().size();
    if (!out || capacity < rows.size() * *dim) return;
    for (size_t c = 0; c < rows.size(); ++c)
      for (size_t j = 0; j < *dim; ++j) out[c * *dim + j] = rows[c][j];
  });
}

tg_status tg_model_embedding_analysis(const tg_model* model, double* pca_out, double* distances_out) {
  TG_CHECK_ARG(model && pca_out && distances_out, "model, pca_out and distances_out are required");
  return guarded([&] {
    const auto result = trajgan::analyze_generator(model->session->generator());
    for (size_t c = 0; c < trajgan::kNumClasses; ++c) {
      pca_out[c * 2] = result.pca.coords[c][0];
      pca_out[c * 2 + 1] = result.pca.coords[c][1];
      for (size_t j = 0; j < trajgan::kNumClasses; ++j) distances_out[c * trajgan::kNumClasses + j] = result.distances[c][j];
    }
  });
}

tg_status tg_ade_fde(size_t n, size_t len, const double* pred, const double* truth, double* ade, double* fde) {
  TG_CHECK_ARG(pred && truth && ade && fde, "pred, truth, ade and fde are required");
  return guarded([&] {
    std::vector<trajgan::TrajectoryPair> pairs(n);
    for (size_t i = 0; i < n; ++i)
      for (size_t t = 0; t < len; ++t) {
        const size_t o = (i * len + t) * 2;
        pairs[i].pred.push_back({pred[o], pred[o + 1]});
        pairs[i].truth.push_back({truth[o], truth[o + 1]});
      }
    *ade = trajgan::ade(pairs);
    *fde = trajgan::fde(pairs);
  });
}

}  // extern "C"
