// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "ssmflow/ssmflow.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "pipeline/bench.hpp"
#include "pipeline/config.hpp"
#include "pipeline/model.hpp"
#include "pipeline/scene.hpp"
#include "pipeline/train.hpp"

struct ssmf_config {
  ssmflow::NetworkConfig value;
};

struct ssmf_scene {
  ssmflow::SyntheticScene value;
};

struct ssmf_model {
  std::unique_ptr<ssmflow::Model> value;
};

struct ssmf_trainer {
  ssmf_model* model = nullptr;
  ssmflow::TrainState state;
};

namespace {

thread_local std::string g_last_error;

ssmf_status fail(ssmf_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Maps the library's exception hierarchy onto status codes.
template <class F>
ssmf_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SSMF_OK;
  } catch (const ssmflow::ConfigError& e) {
    return fail(SSMF_ERR_CONFIG, e.what());
  } catch (const ssmflow::IoError& e) {
    return fail(SSMF_ERR_IO, e.what());
  } catch (const ssmflow::TrainingError& e) {
    return fail(SSMF_ERR_TRAINING, e.what());
  } catch (const ssmflow::CheckpointError& e) {
    return fail(SSMF_ERR_CHECKPOINT, e.what());
  } catch (const ssmflow::DimensionError& e) {
    return fail(SSMF_ERR_DIMENSION, e.what());
  } catch (const ssmflow::DomainError& e) {
    return fail(SSMF_ERR_DOMAIN, e.what());
  } catch (const ssmflow::NumericError& e) {
    return fail(SSMF_ERR_NUMERIC, e.what());
  } catch (const ssmflow::ContractError& e) {
    return fail(SSMF_ERR_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SSMF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SSMF_ERR_INTERNAL, e.what());
  }
}

ssmf_status null_arg(const char* what) { return fail(SSMF_ERR_ARGUMENT, std::string(what) + " is null"); }

ssmflow::Tensor cloud(const double* data, std::size_t n) {
  return ssmflow::Tensor::from({n, 3}, std::vector<double>(data, data + 3 * n));
}

ssmf_status copy_tensor(const ssmflow::Tensor& t, double* out, std::size_t capacity) {
  if (!out) return null_arg("out");
  if (capacity < t.numel()) {
    return fail(SSMF_ERR_ARGUMENT, "buffer holds " + std::to_string(capacity) + " doubles, need " +
                                       std::to_string(t.numel()));
  }
  auto d = t.data();
  std::copy(d.begin(), d.end(), out);
  g_last_error.clear();
  return SSMF_OK;
}

void fill_metrics(const ssmflow::pc::MetricsReport& r, ssmf_metrics* out) {
  out->epe3d = r.epe3d;
  out->acc3ds = r.acc3ds;
  out->acc3dr = r.acc3dr;
  out->outliers = r.outliers;
}

}  // namespace

extern "C" {

const char* ssmf_version(void) { return "0.1.0"; }

const char* ssmf_last_error(void) { return g_last_error.c_str(); }

const char* ssmf_status_name(ssmf_status status) {
  switch (status) {
    case SSMF_OK: return "ok";
    case SSMF_ERR_ARGUMENT: return "invalid argument";
    case SSMF_ERR_CONFIG: return "configuration error";
    case SSMF_ERR_IO: return "i/o error";
    case SSMF_ERR_TRAINING: return "training diverged";
    case SSMF_ERR_CHECKPOINT: return "checkpoint mismatch";
    case SSMF_ERR_DIMENSION: return "dimension mismatch";
    case SSMF_ERR_DOMAIN: return "domain error";
    case SSMF_ERR_NUMERIC: return "numeric error";
    case SSMF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---- configuration -------------------------------------------------------

ssmf_status ssmf_config_create(ssmf_config** out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ssmf_config{}; });
}

void ssmf_config_destroy(ssmf_config* config) { delete config; }

ssmf_status ssmf_config_load(ssmf_config* config, const char* path) {
  if (!config) return null_arg("config");
  if (!path) return null_arg("path");
  return guarded([&] { config->value = ssmflow::load_config(path, config->value); });
}

ssmf_status ssmf_config_set(ssmf_config* config, const char* key, const char* value) {
  if (!config) return null_arg("config");
  if (!key || !value) return null_arg("key/value");
  return guarded([&] { ssmflow::apply_setting(config->value, key, value); });
}

ssmf_status ssmf_config_get(const ssmf_config* config, const char* key, char* buf, size_t capacity,
                            size_t* needed) {
  if (!config) return null_arg("config");
  if (!key) return null_arg("key");
  std::string value;
  ssmf_status st = guarded([&] { value = ssmflow::get_setting(config->value, key); });
  if (st != SSMF_OK) return st;
  if (needed) *needed = value.size() + 1;
  if (!buf || capacity < value.size() + 1) {
    return fail(SSMF_ERR_ARGUMENT, "buffer too small for value of '" + std::string(key) + "'");
  }
  std::memcpy(buf, value.c_str(), value.size() + 1);
  return SSMF_OK;
}

ssmf_status ssmf_config_validate(const ssmf_config* config) {
  if (!config) return null_arg("config");
  return guarded([&] { config->value.validate(); });
}

ssmf_status ssmf_config_write(const ssmf_config* config, const char* path) {
  if (!config) return null_arg("config");
  if (!path) return null_arg("path");
  return guarded([&] {
    std::ofstream out(path);
    if (!out) throw ssmflow::IoError(std::string("cannot write config '") + path + "'");
    out << ssmflow::format_config(config->value);
    if (!out) throw ssmflow::IoError(std::string("failed writing config '") + path + "'");
  });
}

// ---- scenes ----------------------------------------------------------------

void ssmf_scene_spec_default(ssmf_scene_spec* spec) {
  if (!spec) return;
  const ssmflow::SceneSpec d;
  spec->objects = d.objects;
  spec->points = d.points;
  spec->transform = "rigid";
  spec->magnitude = d.magnitude;
  spec->noise = d.noise;
  spec->occlusion = d.occlusion;
}

ssmf_status ssmf_scene_generate(const ssmf_scene_spec* spec, uint64_t seed, ssmf_scene** out) {
  if (!spec) return null_arg("spec");
  if (!out) return null_arg("out");
  return guarded([&] {
    ssmflow::SceneSpec s;
    s.objects = spec->objects;
    s.points = spec->points;
    s.transform = ssmflow::parse_transform(spec->transform ? spec->transform : "rigid");
    s.magnitude = spec->magnitude;
    s.noise = spec->noise;
    s.occlusion = spec->occlusion;
    auto scene = std::make_unique<ssmf_scene>();
    scene->value = ssmflow::generate_scene(s, seed);
    *out = scene.release();
  });
}

ssmf_status ssmf_scene_create(const double* source, const double* flow, size_t n, const double* target, size_t m,
                              ssmf_scene** out) {
  if (!source || !flow || !target) return null_arg("point buffer");
  if (!out) return null_arg("out");
  return guarded([&] {
    auto scene = std::make_unique<ssmf_scene>();
    scene->value.source = cloud(source, n);
    scene->value.flow = cloud(flow, n);
    scene->value.target = cloud(target, m);
    scene->value.spec.points = n;
    *out = scene.release();
  });
}

ssmf_status ssmf_scene_read(const char* path, ssmf_scene** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] {
    auto scene = std::make_unique<ssmf_scene>();
    scene->value = ssmflow::read_scene(path);
    *out = scene.release();
  });
}

ssmf_status ssmf_scene_write(const ssmf_scene* scene, const char* path) {
  if (!scene) return null_arg("scene");
  if (!path) return null_arg("path");
  return guarded([&] { ssmflow::write_scene(scene->value, path); });
}

void ssmf_scene_destroy(ssmf_scene* scene) { delete scene; }

size_t ssmf_scene_source_count(const ssmf_scene* scene) { return scene ? scene->value.source.rows() : 0; }
size_t ssmf_scene_target_count(const ssmf_scene* scene) { return scene ? scene->value.target.rows() : 0; }
uint64_t ssmf_scene_seed(const ssmf_scene* scene) { return scene ? scene->value.seed : 0; }

ssmf_status ssmf_scene_copy_source(const ssmf_scene* scene, double* out, size_t capacity) {
  if (!scene) return null_arg("scene");
  return copy_tensor(scene->value.source, out, capacity);
}

ssmf_status ssmf_scene_copy_target(const ssmf_scene* scene, double* out, size_t capacity) {
  if (!scene) return null_arg("scene");
  return copy_tensor(scene->value.target, out, capacity);
}

ssmf_status ssmf_scene_copy_flow(const ssmf_scene* scene, double* out, size_t capacity) {
  if (!scene) return null_arg("scene");
  return copy_tensor(scene->value.flow, out, capacity);
}

// ---- model -----------------------------------------------------------------

ssmf_status ssmf_model_create(const ssmf_config* config, ssmf_model** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  return guarded([&] {
    auto model = std::make_unique<ssmf_model>();
    model->value = std::make_unique<ssmflow::Model>(config->value);
    *out = model.release();
  });
}

void ssmf_model_destroy(ssmf_model* model) { delete model; }

size_t ssmf_model_param_count(const ssmf_model* model) { return model ? model->value->params().total_size() : 0; }

size_t ssmf_model_iterations(const ssmf_model* model) { return model ? model->value->config().iterations : 0; }

ssmf_status ssmf_model_save(const ssmf_model* model, const char* path) {
  if (!model) return null_arg("model");
  if (!path) return null_arg("path");
  return guarded([&] { ssmflow::save_checkpoint(model->value->params(), path); });
}

ssmf_status ssmf_model_load(ssmf_model* model, const char* path) {
  if (!model) return null_arg("model");
  if (!path) return null_arg("path");
  return guarded([&] { ssmflow::load_checkpoint(model->value->params(), path); });
}

ssmf_status ssmf_model_predict(const ssmf_model* model, const double* source, size_t n, const double* target,
                               size_t m, size_t iterations, double* flow_out, size_t* index_out, size_t capacity,
                               size_t* count) {
  if (!model) return null_arg("model");
  if (!source || !target) return null_arg("point buffer");
  if (!flow_out) return null_arg("flow_out");
  return guarded([&] {
    ssmflow::NoGradScope no_grad;
    auto result = ssmflow::forward(*model->value, cloud(source, n), cloud(target, m),
                                   iterations ? std::optional<std::size_t>(iterations) : std::nullopt);
    const auto& pred = result.prediction();
    const auto& index = result.source_index.front();
    if (count) *count = index.size();
    if (capacity < index.size()) {
      throw ssmflow::ContractError("prediction has " + std::to_string(index.size()) + " points, buffer holds " +
                                   std::to_string(capacity));
    }
    auto d = pred.data();
    std::copy(d.begin(), d.end(), flow_out);
    if (index_out) std::copy(index.begin(), index.end(), index_out);
  });
}

ssmf_status ssmf_model_evaluate(const ssmf_model* model, const ssmf_scene* scene, size_t iterations,
                                ssmf_metrics* out) {
  if (!model) return null_arg("model");
  if (!scene) return null_arg("scene");
  if (!out) return null_arg("out");
  return guarded([&] {
    const std::size_t iters = iterations ? iterations : model->value->config().iterations;
    fill_metrics(ssmflow::evaluate_scene(*model->value, scene->value, iters), out);
  });
}

ssmf_status ssmf_model_evaluate_iterations(const ssmf_model* model, const ssmf_scene* scene, size_t iterations,
                                           ssmf_metrics* out) {
  if (!model) return null_arg("model");
  if (!scene) return null_arg("scene");
  if (!out) return null_arg("out");
  return guarded([&] {
    auto rows = ssmflow::evaluate_iterations(*model->value, scene->value, iterations);
    for (std::size_t i = 0; i < rows.size(); ++i) fill_metrics(rows[i], out + i);
  });
}

ssmf_status ssmf_model_loss(const ssmf_model* model, const ssmf_scene* scene, double* loss) {
  if (!model) return null_arg("model");
  if (!scene) return null_arg("scene");
  if (!loss) return null_arg("loss");
  return guarded([&] { *loss = ssmflow::scene_loss(*model->value, scene->value); });
}

// ---- training --------------------------------------------------------------

ssmf_status ssmf_trainer_create(ssmf_model* model, ssmf_trainer** out) {
  if (!model) return null_arg("model");
  if (!out) return null_arg("out");
  return guarded([&] {
    auto trainer = std::make_unique<ssmf_trainer>();
    trainer->model = model;
    trainer->state = ssmflow::TrainState::init(model->value->params());
    *out = trainer.release();
  });
}

void ssmf_trainer_destroy(ssmf_trainer* trainer) { delete trainer; }

size_t ssmf_trainer_step_count(const ssmf_trainer* trainer) { return trainer ? trainer->state.step : 0; }

ssmf_status ssmf_trainer_step(ssmf_trainer* trainer, const ssmf_scene* const* scenes, size_t count,
                              double* loss_out, double* lr_out) {
  if (!trainer) return null_arg("trainer");
  if (!scenes || count == 0) return fail(SSMF_ERR_ARGUMENT, "training batch is empty");
  for (size_t i = 0; i < count; ++i) {
    if (!scenes[i]) return null_arg("scene");
  }
  return guarded([&] {
    std::vector<ssmflow::SyntheticScene> batch;
    batch.reserve(count);
    for (size_t i = 0; i < count; ++i) batch.push_back(scenes[i]->value);
    auto report = ssmflow::train_step(*trainer->model->value, trainer->state, batch);
    if (loss_out) *loss_out = report.loss;
    if (lr_out) *lr_out = report.lr;
  });
}

// ---- benchmark -------------------------------------------------------------

ssmf_status ssmf_bench_scan(size_t length, size_t state_size, size_t channels, size_t repeats, uint64_t seed,
                            ssmf_bench_row rows[3]) {
  if (!rows) return null_arg("rows");
  return guarded([&] {
    auto result = ssmflow::bench_scan(length, state_size, channels, repeats, seed);
    static const char* const kNames[] = {"sequential", "parallel", "kernel-conv"};
    for (std::size_t i = 0; i < 3; ++i) {
      rows[i].kernel = kNames[i];
      rows[i].length = result[i].length;
      rows[i].state_size = result[i].state_size;
      rows[i].ns_per_element = result[i].ns_per_element;
      rows[i].max_abs_diff = result[i].max_abs_diff;
    }
  });
}

}  // extern "C"
