#ifndef TRAJGAN_TRAJGAN_H
#define TRAJGAN_TRAJGAN_H

/* C interface to the trajgan library. Every call returns a tg_status;
 * on failure tg_last_error() describes the problem (thread-local, valid
 * until the next call on the same thread). Strings returned through char**
 * are owned by the caller and released with tg_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(TRAJGAN_BUILDING_LIBRARY)
#define TG_API __attribute__((visibility("default")))
#else
#define TG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tg_status {
  TG_OK = 0,
  TG_ERR_ARGUMENT = 1,
  TG_ERR_CONFIG = 2,
  TG_ERR_DATA = 3,
  TG_ERR_NUMERIC = 4,
  TG_ERR_CONTRACT = 5,
  TG_ERR_UNAVAILABLE = 6,
  TG_ERR_IO = 7,
  TG_ERR_INTERNAL = 8
} tg_status;

typedef struct tg_config tg_config;
typedef struct tg_model tg_model;

typedef void (*tg_line_fn)(const char* line, void* user);

TG_API const char* tg_version(void);
TG_API const char* tg_last_error(void);
TG_API const char* tg_status_name(tg_status status);
TG_API void tg_string_free(char* text);

/* ---- configuration ---- */

TG_API tg_status tg_config_new(tg_config** out);
TG_API tg_status tg_config_load(const char* path, tg_config** out);
TG_API void tg_config_free(tg_config* config);
/* Dotted key ("train.epochs"); value is JSON text or a bare string. */
TG_API tg_status tg_config_set(tg_config* config, const char* key, const char* value);
TG_API tg_status tg_config_to_json(const tg_config* config, char** out_json);
TG_API tg_status tg_config_save(const tg_config* config, const char* path);
TG_API tg_status tg_config_hash(const tg_config* config, char** out_hash);

/* ---- commands ---- */

/* input_dir may be NULL to use TRAJGAN_DATA_ROOT. */
TG_API tg_status tg_run_parse(const char* input_dir, const char* output_csv, int64_t frame_stride,
                              char** out_summary);
TG_API tg_status tg_run_train(const tg_config* config, int resume, int overwrite, tg_line_fn progress,
                              void* user);
/* split: "train", "val", "test" or "all"; k == 0 uses the model's k.
 * data_config may be NULL to use the checkpoint's data section. The noise
 * seed is the run seed unless has_seed is nonzero. */
TG_API tg_status tg_run_eval(const char* checkpoint, const char* out_dir, const char* split, size_t k,
                             const tg_config* data_config, int has_seed, uint64_t seed, char** out_table);
TG_API tg_status tg_run_analyze(const char* checkpoint, const char* out_dir, char** out_summary);

/* ---- models ---- */

TG_API tg_status tg_model_load(const char* checkpoint, tg_model** out);
TG_API void tg_model_free(tg_model* model);
TG_API tg_status tg_model_shape(const tg_model* model, size_t* t_obs, size_t* t_pred, size_t* k_samples);
/* One scene of n_agents. observed: n_agents * t_obs * 2 doubles (x, y per
 * step, agent-major); labels: class indices in [0, 6). out receives
 * k * n_agents * t_pred * 2 doubles, sample-major then agent. */
TG_API tg_status tg_model_predict(const tg_model* model, size_t n_agents, const double* observed,
                                  const int* labels, size_t k, uint64_t seed, double* out);
/* Writes the 6 x dim class embedding matrix when capacity >= 6 * dim; always
 * reports dim. */
TG_API tg_status tg_model_class_embeddings(const tg_model* model, double* out, size_t capacity, size_t* dim);
/* 6 x 2 PCA coordinates and 6 x 6 distances of the class embeddings. */
TG_API tg_status tg_model_embedding_analysis(const tg_model* model, double* pca_out, double* distances_out);

/* ---- metrics ---- */

/* n trajectories of len points each, (x, y) interleaved. */
TG_API tg_status tg_ade_fde(size_t n, size_t len, const double* pred, const double* truth, double* ade,
                            double* fde);

#ifdef __cplusplus
}
#endif

#endif
