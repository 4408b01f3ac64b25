/* SPDX-License-Identifier: Apache-2.0 */
/* Copyright 2026 The ssmflow Authors */

/* C interface to the ssmflow scene-flow library.
 *
 * Every object is an opaque handle released by its matching _destroy call.
 * Functions returning ssmf_status leave a description of the last failure
 * on the calling thread, readable through ssmf_last_error(). */

#ifndef SSMFLOW_SSMFLOW_H_
#define SSMFLOW_SSMFLOW_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SSMF_API __declspec(dllexport)
#else
#define SSMF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ssmf_status {
  SSMF_OK = 0,
  SSMF_ERR_ARGUMENT = 1,   /* null handle, bad buffer size */
  SSMF_ERR_CONFIG = 2,     /* unknown key, invalid value */
  SSMF_ERR_IO = 3,         /* unreadable or unwritable file */
  SSMF_ERR_TRAINING = 4,   /* non-finite loss */
  SSMF_ERR_CHECKPOINT = 5, /* checkpoint does not match the model */
  SSMF_ERR_DIMENSION = 6,  /* shape mismatch */
  SSMF_ERR_DOMAIN = 7,     /* argument outside the supported range */
  SSMF_ERR_NUMERIC = 8,    /* non-finite intermediate */
  SSMF_ERR_INTERNAL = 9
} ssmf_status;

typedef struct ssmf_config ssmf_config;
typedef struct ssmf_scene ssmf_scene;
typedef struct ssmf_model ssmf_model;
typedef struct ssmf_trainer ssmf_trainer;

SSMF_API const char* ssmf_version(void);
SSMF_API const char* ssmf_last_error(void);
SSMF_API const char* ssmf_status_name(ssmf_status status);

/* ---- configuration ---------------------------------------------------- */

SSMF_API ssmf_status ssmf_config_create(ssmf_config** out);
SSMF_API void ssmf_config_destroy(ssmf_config* config);
/* Applies `key = value` lines from a file on top of the current values. */
SSMF_API ssmf_status ssmf_config_load(ssmf_config* config, const char* path);
SSMF_API ssmf_status ssmf_config_set(ssmf_config* config, const char* key, const char* value);
/* Copies the value of `key` into buf. *needed (optional) receives the length
 * including the terminator; a short buffer yields SSMF_ERR_ARGUMENT. */
SSMF_API ssmf_status ssmf_config_get(const ssmf_config* config, const char* key, char* buf, size_t capacity,
                                     size_t* needed);
SSMF_API ssmf_status ssmf_config_validate(const ssmf_config* config);
/* Writes every key with its resolved value. */
SSMF_API ssmf_status ssmf_config_write(const ssmf_config* config, const char* path);

/* ---- scenes ----------------------------------------------------------- */

typedef struct ssmf_scene_spec {
  size_t objects;
  size_t points;
  const char* transform; /* identity, translate, rotate30, rigid */
  double magnitude;
  double noise;
  double occlusion;
} ssmf_scene_spec;

SSMF_API void ssmf_scene_spec_default(ssmf_scene_spec* spec);
SSMF_API ssmf_status ssmf_scene_generate(const ssmf_scene_spec* spec, uint64_t seed, ssmf_scene** out);
/* Row-major [n x 3] source and flow, [m x 3] target; copies the data. */
SSMF_API ssmf_status ssmf_scene_create(const double* source, const double* flow, size_t n, const double* target,
                                       size_t m, ssmf_scene** out);
SSMF_API ssmf_status ssmf_scene_read(const char* path, ssmf_scene** out);
SSMF_API ssmf_status ssmf_scene_write(const ssmf_scene* scene, const char* path);
SSMF_API void ssmf_scene_destroy(ssmf_scene* scene);
SSMF_API size_t ssmf_scene_source_count(const ssmf_scene* scene);
SSMF_API size_t ssmf_scene_target_count(const ssmf_scene* scene);
SSMF_API uint64_t ssmf_scene_seed(const ssmf_scene* scene);
/* Each copies count*3 doubles into out. */
SSMF_API ssmf_status ssmf_scene_copy_source(const ssmf_scene* scene, double* out, size_t capacity);
SSMF_API ssmf_status ssmf_scene_copy_target(const ssmf_scene* scene, double* out, size_t capacity);
SSMF_API ssmf_status ssmf_scene_copy_flow(const ssmf_scene* scene, double* out, size_t capacity);

/* ---- model ------------------------------------------------------------ */

typedef struct ssmf_metrics {
  double epe3d;
  double acc3ds;
  double acc3dr;
  double outliers;
} ssmf_metrics;

/* Builds and initializes a model from the config (seeded by its `seed`). */
SSMF_API ssmf_status ssmf_model_create(const ssmf_config* config, ssmf_model** out);
SSMF_API void ssmf_model_destroy(ssmf_model* model);
SSMF_API size_t ssmf_model_param_count(const ssmf_model* model);
SSMF_API size_t ssmf_model_iterations(const ssmf_model* model);
SSMF_API ssmf_status ssmf_model_save(const ssmf_model* model, const char* path);
SSMF_API ssmf_status ssmf_model_load(ssmf_model* model, const char* path);

/* Finest-level flow after `iterations` per level (0: configured count).
 * Writes *count points: flow_out receives count*3 doubles and index_out
 * (optional) the source row of each. `capacity` is in points. */
SSMF_API ssmf_status ssmf_model_predict(const ssmf_model* model, const double* source, size_t n,
                                        const double* target, size_t m, size_t iterations, double* flow_out,
                                        size_t* index_out, size_t capacity, size_t* count);

/* Metrics of the finest-level prediction after `iterations` per level. */
SSMF_API ssmf_status ssmf_model_evaluate(const ssmf_model* model, const ssmf_scene* scene, size_t iterations,
                                         ssmf_metrics* out);

/* Runs one forward pass with `iterations` per level and reports metrics of
 * the finest-level flow after each iteration; out holds `iterations` rows. */
SSMF_API ssmf_status ssmf_model_evaluate_iterations(const ssmf_model* model, const ssmf_scene* scene,
                                                    size_t iterations, ssmf_metrics* out);

/* Loss of one scene without updating anything. */
SSMF_API ssmf_status ssmf_model_loss(const ssmf_model* model, const ssmf_scene* scene, double* loss);

/* ---- training --------------------------------------------------------- */

/* The trainer keeps optimizer state for `model`, which must outlive it. */
SSMF_API ssmf_status ssmf_trainer_create(ssmf_model* model, ssmf_trainer** out);
SSMF_API void ssmf_trainer_destroy(ssmf_trainer* trainer);
SSMF_API size_t ssmf_trainer_step_count(const ssmf_trainer* trainer);
/* One optimizer step over `count` scenes. loss_out and lr_out are optional. */
SSMF_API ssmf_status ssmf_trainer_step(ssmf_trainer* trainer, const ssmf_scene* const* scenes, size_t count,
                                       double* loss_out, double* lr_out);

/* ---- benchmark -------------------------------------------------------- */

typedef struct ssmf_bench_row {
  const char* kernel; /* static string: sequential, parallel, kernel-conv */
  size_t length;
  size_t state_size;
  double ns_per_element;
  double max_abs_diff;
} ssmf_bench_row;

/* Fills three rows (sequential, parallel, kernel-conv). */
SSMF_API ssmf_status ssmf_bench_scan(size_t length, size_t state_size, size_t channels, size_t repeats,
                                     uint64_t seed, ssmf_bench_row rows[3]);

#ifdef __cplusplus
}
#endif

#endif /* SSMFLOW_SSMFLOW_H_ */
