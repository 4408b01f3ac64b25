// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "ssmflow/ssmflow.h"

namespace fs = std::filesystem;

namespace {

std::string get(const ssmf_config* cfg, const char* key) {
  size_t needed = 0;
  REQUIRE(ssmf_config_get(cfg, key, nullptr, 0, &needed) == SSMF_ERR_ARGUMENT);
  std::string buf(needed, '\0');
  REQUIRE(ssmf_config_get(cfg, key, buf.data(), buf.size(), nullptr) == SSMF_OK);
  buf.resize(needed - 1);
  return buf;
}

ssmf_config* small_config() {
  ssmf_config* cfg = nullptr;
  REQUIRE(ssmf_config_create(&cfg) == SSMF_OK);
  const char* settings[][2] = {{"levels", "2"}, {"points", "32,8"}, {"channels", "6"}, {"motion_channels", "5"},
                               {"k", "4"},      {"blocks", "1"},    {"state_size", "3"}};
  for (auto& kv : settings) REQUIRE(ssmf_config_set(cfg, kv[0], kv[1]) == SSMF_OK);
  return cfg;
}

ssmf_scene* scene(uint64_t seed, const char* transform = "rigid") {
  ssmf_scene_spec spec;
  ssmf_scene_spec_default(&spec);
  spec.points = 32;
  spec.transform = transform;
  ssmf_scene* s = nullptr;
  REQUIRE(ssmf_scene_generate(&spec, seed, &s) == SSMF_OK);
  return s;
}

fs::path temp_path(const std::string& name) {
  auto dir = fs::temp_directory_path() / "ssmflow_capi";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(ssmf_status_name(SSMF_OK)) == "ok");
  CHECK(std::string(ssmf_status_name(SSMF_ERR_CHECKPOINT)).size() > 0);
  CHECK(std::strlen(ssmf_version()) > 0);
}

TEST_CASE("config set, get and errors") {
  ssmf_config* cfg = small_config();
  CHECK(get(cfg, "points") == "32,8");
  CHECK(get(cfg, "update") == "isu-fio");
  CHECK(ssmf_config_set(cfg, "nope", "1") == SSMF_ERR_CONFIG);
  CHECK(std::string(ssmf_last_error()).find("nope") != std::string::npos);
  CHECK(ssmf_config_set(cfg, "levels", "x") == SSMF_ERR_CONFIG);
  CHECK(ssmf_config_validate(cfg) == SSMF_OK);
  CHECK(ssmf_config_set(cfg, "points", "8,32") == SSMF_OK);
  CHECK(ssmf_config_validate(cfg) == SSMF_ERR_CONFIG);
  CHECK(ssmf_config_load(cfg, "/nonexistent/x.cfg") == SSMF_ERR_IO);
  CHECK(ssmf_config_create(nullptr) == SSMF_ERR_ARGUMENT);

  auto path = temp_path("resolved.cfg").string();
  CHECK(ssmf_config_set(cfg, "points", "32,8") == SSMF_OK);
  REQUIRE(ssmf_config_write(cfg, path.c_str()) == SSMF_OK);
  ssmf_config* back = nullptr;
  REQUIRE(ssmf_config_create(&back) == SSMF_OK);
  REQUIRE(ssmf_config_load(back, path.c_str()) == SSMF_OK);
  CHECK(get(back, "channels") == "6");
  ssmf_config_destroy(back);
  ssmf_config_destroy(cfg);
}

TEST_CASE("scene create, copy and file round trip") {
  const double src[] = {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1};
  const double flow[] = {0.1, 0, 0, 0.1, 0, 0, 0.1, 0, 0, 0.1, 0, 0};
  double tgt[12];
  for (int i = 0; i < 12; ++i) tgt[i] = src[i] + flow[i];
  ssmf_scene* s = nullptr;
  CHECK(ssmf_scene_create(src, flow, 4, nullptr, 0, &s) == SSMF_ERR_ARGUMENT);
  REQUIRE(ssmf_scene_create(src, flow, 4, tgt, 4, &s) == SSMF_OK);
  CHECK(ssmf_scene_source_count(s) == 4);
  CHECK(ssmf_scene_target_count(s) == 4);
  std::vector<double> t(12);
  REQUIRE(ssmf_scene_copy_target(s, t.data(), t.size()) == SSMF_OK);
  for (int i = 0; i < 12; ++i) CHECK(t[i] == src[i] + flow[i]);
  CHECK(ssmf_scene_copy_target(s, t.data(), 11) == SSMF_ERR_ARGUMENT);

  auto path = temp_path("scene.txt").string();
  REQUIRE(ssmf_scene_write(s, path.c_str()) == SSMF_OK);
  ssmf_scene* r = nullptr;
  REQUIRE(ssmf_scene_read(path.c_str(), &r) == SSMF_OK);
  std::vector<double> a(12), b(12);
  ssmf_scene_copy_flow(s, a.data(), 12);
  ssmf_scene_copy_flow(r, b.data(), 12);
  CHECK(a == b);
  CHECK(ssmf_scene_read("/nonexistent/scene.txt", &r) == SSMF_ERR_IO);
  ssmf_scene_destroy(r);
  ssmf_scene_destroy(s);

  ssmf_scene_spec spec;
  ssmf_scene_spec_default(&spec);
  spec.transform = "shear";
  CHECK(ssmf_scene_generate(&spec, 1, &s) == SSMF_ERR_CONFIG);
}

TEST_CASE("model predict, evaluate and loss") {
  ssmf_config* cfg = small_config();
  ssmf_model* model = nullptr;
  REQUIRE(ssmf_model_create(cfg, &model) == SSMF_OK);
  CHECK(ssmf_model_param_count(model) > 0);
  CHECK(ssmf_model_iterations(model) == 2);

  ssmf_scene* s = scene(3);
  std::vector<double> src(96), tgt(96), flow(96);
  ssmf_scene_copy_source(s, src.data(), 96);
  ssmf_scene_copy_target(s, tgt.data(), 96);
  std::vector<size_t> index(32);
  size_t count = 0;
  REQUIRE(ssmf_model_predict(model, src.data(), 32, tgt.data(), 32, 0, flow.data(), index.data(), 32, &count) ==
          SSMF_OK);
  CHECK(count == 32);
  for (double v : flow) CHECK(v == 0.0);  // zero-initialized flow head
  CHECK(ssmf_model_predict(model, src.data(), 32, tgt.data(), 32, 0, flow.data(), nullptr, 16, &count) ==
        SSMF_ERR_ARGUMENT);
  CHECK(ssmf_model_predict(model, src.data(), 8, tgt.data(), 8, 0, flow.data(), nullptr, 32, &count) ==
        SSMF_ERR_DOMAIN);

  ssmf_metrics m{};
  REQUIRE(ssmf_model_evaluate(model, s, 2, &m) == SSMF_OK);
  CHECK(m.epe3d > 0.0);
  std::vector<ssmf_metrics> per(3);
  REQUIRE(ssmf_model_evaluate_iterations(model, s, 3, per.data()) == SSMF_OK);
  double loss = 0.0;
  REQUIRE(ssmf_model_loss(model, s, &loss) == SSMF_OK);
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);

  ssmf_scene_destroy(s);
  ssmf_model_destroy(model);
  ssmf_config_destroy(cfg);
}

TEST_CASE("trainer steps reduce loss and checkpoints round trip") {
  ssmf_config* cfg = small_config();
  ssmf_config_set(cfg, "steps", "30");
  ssmf_config_set(cfg, "lr", "0.01");
  ssmf_model* model = nullptr;
  REQUIRE(ssmf_model_create(cfg, &model) == SSMF_OK);
  ssmf_trainer* trainer = nullptr;
  REQUIRE(ssmf_trainer_create(model, &trainer) == SSMF_OK);
  ssmf_scene* s = scene(4, "translate");
  const ssmf_scene* batch[] = {s};
  double first = 0.0, last = 0.0, lr = 0.0;
  for (int i = 0; i < 30; ++i) {
    double loss = 0.0;
    REQUIRE(ssmf_trainer_step(trainer, batch, 1, &loss, &lr) == SSMF_OK);
    if (i == 0) first = loss;
    last = loss;
  }
  CHECK(ssmf_trainer_step_count(trainer) == 30);
  CHECK(last < first);
  CHECK(ssmf_trainer_step(trainer, batch, 0, nullptr, nullptr) != SSMF_OK);

  auto path = temp_path("model.bin").string();
  REQUIRE(ssmf_model_save(model, path.c_str()) == SSMF_OK);
  ssmf_model* copy = nullptr;
  REQUIRE(ssmf_model_create(cfg, &copy) == SSMF_OK);
  REQUIRE(ssmf_model_load(copy, path.c_str()) == SSMF_OK);
  double a = 0.0, b = 0.0;
  ssmf_model_loss(model, s, &a);
  ssmf_model_loss(copy, s, &b);
  CHECK(a == b);

  ssmf_config_set(cfg, "channels", "8");
  ssmf_model* wide = nullptr;
  REQUIRE(ssmf_model_create(cfg, &wide) == SSMF_OK);
  CHECK(ssmf_model_load(wide, path.c_str()) == SSMF_ERR_CHECKPOINT);
  CHECK(ssmf_model_load(wide, "/nonexistent/model.bin") == SSMF_ERR_IO);

  ssmf_model_destroy(wide);
  ssmf_model_destroy(copy);
  ssmf_trainer_destroy(trainer);
  ssmf_scene_destroy(s);
  ssmf_model_destroy(model);
  ssmf_config_destroy(cfg);
}

TEST_CASE("bench rows") {
  ssmf_bench_row rows[3];
  REQUIRE(ssmf_bench_scan(128, 4, 2, 3, 1, rows) == SSMF_OK);
  CHECK(std::string(rows[0].kernel) == "sequential");
  CHECK(std::string(rows[2].kernel) == "kernel-conv");
  for (const auto& r : rows) CHECK(r.max_abs_diff < 1e-9);
  CHECK(ssmf_bench_scan(128, 4, 2, 1, 1, rows) == SSMF_ERR_CONFIG);
}

TEST_CASE("null handles are argument errors") {
  double loss = 0.0;
  CHECK(ssmf_model_loss(nullptr, nullptr, &loss) == SSMF_ERR_ARGUMENT);
  CHECK(ssmf_trainer_create(nullptr, nullptr) == SSMF_ERR_ARGUMENT);
  ssmf_config_destroy(nullptr);
  ssmf_model_destroy(nullptr);
}
