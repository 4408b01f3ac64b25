// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors
//
// Command-line driver: scene generation, training, evaluation, scan
// benchmarks and update-operator ablations. Talks to the library only
// through the C interface.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssmflow/ssmflow.h"

namespace fs = std::filesystem;

namespace {

enum ExitCode {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kDiverged = 3,
  kCheckpoint = 4,
  kBenchFailure = 5,
};

// Carries an exit code out of nested helpers.
struct Exit {
  int code;
  std::string message;
};

int exit_code_for(ssmf_status st) {
  switch (st) {
    case SSMF_OK: return kOk;
    case SSMF_ERR_IO: return kIo;
    case SSMF_ERR_TRAINING: return kDiverged;
    case SSMF_ERR_CHECKPOINT: return kCheckpoint;
    default: return kUsage;
  }
}

void check(ssmf_status st, const std::string& what) {
  if (st != SSMF_OK) throw Exit{exit_code_for(st), what + ": " + ssmf_last_error()};
}

struct ConfigDeleter {
  void operator()(ssmf_config* c) const { ssmf_config_destroy(c); }
};
struct SceneDeleter {
  void operator()(ssmf_scene* s) const { ssmf_scene_destroy(s); }
};
struct ModelDeleter {
  void operator()(ssmf_model* m) const { ssmf_model_destroy(m); }
};
struct TrainerDeleter {
  void operator()(ssmf_trainer* t) const { ssmf_trainer_destroy(t); }
};
using ConfigPtr = std::unique_ptr<ssmf_config, ConfigDeleter>;
using ScenePtr = std::unique_ptr<ssmf_scene, SceneDeleter>;
using ModelPtr = std::unique_ptr<ssmf_model, ModelDeleter>;
using TrainerPtr = std::unique_ptr<ssmf_trainer, TrainerDeleter>;

std::string fmt(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", d);
  return buf;
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Exit{kIo, "cannot create output directory '" + dir + "'"};
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Exit{kIo, "cannot write '" + path.string() + "'"};
  return out;
}

// Options shared by every command that builds a model.
struct ModelFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::string update;
  long long seed = -1;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--config", f.config_path, "key = value config file");
  cmd->add_option("--set", f.sets, "override, key=value (repeatable)");
  cmd->add_option("--update", f.update, "update operator: conv-gru, mamba-uni, bimamba, isu, isu-fio");
  cmd->add_option("--seed", f.seed, "initialization seed");
}

ConfigPtr resolve_config(const ModelFlags& f) {
  ssmf_config* raw = nullptr;
  check(ssmf_config_create(&raw), "config");
  ConfigPtr cfg(raw);
  if (!f.config_path.empty()) check(ssmf_config_load(cfg.get(), f.config_path.c_str()), "config");
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Exit{kUsage, "--set expects key=value, got '" + kv + "'"};
    check(ssmf_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set");
  }
  if (!f.update.empty()) check(ssmf_config_set(cfg.get(), "update", f.update.c_str()), "--update");
  if (f.seed >= 0) check(ssmf_config_set(cfg.get(), "seed", std::to_string(f.seed).c_str()), "--seed");
  check(ssmf_config_validate(cfg.get()), "config");
  return cfg;
}

std::string config_value(const ssmf_config* cfg, const char* key) {
  char buf[512];
  check(ssmf_config_get(cfg, key, buf, sizeof buf, nullptr), key);
  return buf;
}

void write_config(const ssmf_config* cfg, const fs::path& dir) {
  check(ssmf_config_write(cfg, (dir / "config.resolved").string().c_str()), "config.resolved");
}

// Scene files in a directory, sorted by name; `.target` sidecars excluded.
std::vector<fs::path> scene_files(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Exit{kIo, "scene directory '" + dir + "' not found"};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Exit{kIo, "no scene files (*.txt) in '" + dir + "'"};
  return files;
}

std::vector<ScenePtr> load_scenes(const std::string& dir) {
  std::vector<ScenePtr> out;
  for (const auto& path : scene_files(dir)) {
    ssmf_scene* s = nullptr;
    check(ssmf_scene_read(path.string().c_str(), &s), path.string());
    out.emplace_back(s);
  }
  return out;
}

ModelPtr make_model(const ssmf_config* cfg) {
  ssmf_model* m = nullptr;
  check(ssmf_model_create(cfg, &m), "model");
  return ModelPtr(m);
}

// Trains `model` for `steps`, cycling through `scenes` in batches. Appends
// `step,lr,loss` rows to `log` when given.
void train_loop(ssmf_model* model, const std::vector<ssmf_scene*>& scenes, std::size_t steps, std::size_t batch,
                std::ostream* log) {
  ssmf_trainer* raw = nullptr;
  check(ssmf_trainer_create(model, &raw), "trainer");
  TrainerPtr trainer(raw);
  std::vector<const ssmf_scene*> group(batch);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t j = 0; j < batch; ++j) group[j] = scenes[(s * batch + j) % scenes.size()];
    double loss = 0.0, lr = 0.0;
    check(ssmf_trainer_step(trainer.get(), group.data(), batch, &loss, &lr), "training");
    if (log) *log << (s + 1) << ',' << fmt(lr) << ',' << fmt(loss) << '\n';
  }
}

// ---- gen -------------------------------------------------------------------

struct GenFlags {
  std::size_t objects = 3;
  std::size_t points = 256;
  std::string transform = "rigid";
  double magnitude = 0.5;
  double noise = 0.0;
  double occlusion = 0.0;
  std::size_t count = 1;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_gen(const GenFlags& f) {
  make_dir(f.out);
  ssmf_scene_spec spec;
  ssmf_scene_spec_default(&spec);
  spec.objects = f.objects;
  spec.points = f.points;
  spec.transform = f.transform.c_str();
  spec.magnitude = f.magnitude;
  spec.noise = f.noise;
  spec.occlusion = f.occlusion;
  for (std::size_t i = 0; i < f.count; ++i) {
    ssmf_scene* raw = nullptr;
    check(ssmf_scene_generate(&spec, f.seed + i, &raw), "gen");
    ScenePtr scene(raw);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04zu.txt", i);
    check(ssmf_scene_write(scene.get(), (fs::path(f.out) / name).string().c_str()), "gen");
  }
  auto out = open_out(fs::path(f.out) / "gen.resolved");
  out << "objects = " << f.objects << "\npoints = " << f.points << "\ntransform = " << f.transform
      << "\nmagnitude = " << fmt(f.magnitude) << "\nnoise = " << fmt(f.noise) << "\nocclusion = " << fmt(f.occlusion)
      << "\ncount = " << f.count << "\nseed = " << f.seed << "\n";
  std::cout << "wrote " << f.count << " scene(s) to " << f.out << "\n";
  return kOk;
}

// ---- train -----------------------------------------------------------------

struct TrainFlags {
  ModelFlags model;
  std::string scenes;
  long long steps = -1;
  std::string out;
};

int cmd_train(const TrainFlags& f) {
  ModelFlags mf = f.model;
  if (f.steps >= 0) mf.sets.push_back("steps=" + std::to_string(f.steps));
  auto cfg = resolve_config(mf);
  auto scenes = load_scenes(f.scenes);
  make_dir(f.out);
  write_config(cfg.get(), f.out);
  auto model = make_model(cfg.get());
  const std::size_t steps = std::stoull(config_value(cfg.get(), "steps"));
  const std::size_t batch = std::stoull(config_value(cfg.get(), "batch"));
  std::vector<ssmf_scene*> raw;
  for (auto& s : scenes) raw.push_back(s.get());

  auto log = open_out(fs::path(f.out) / "loss.csv");
  log << "step,lr,loss\n";
  try {
    train_loop(model.get(), raw, steps, batch, &log);
  } catch (const Exit&) {
    log.flush();
    throw;
  }
  check(ssmf_model_save(model.get(), (fs::path(f.out) / "checkpoint.bin").string().c_str()), "checkpoint");
  std::cout << "trained " << steps << " step(s); outputs in " << f.out << "\n";
  return kOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalFlags {
  ModelFlags model;
  std::string checkpoint;
  std::string scenes;
  std::size_t iters = 0;
  std::string out;
};

int cmd_eval(const EvalFlags& f) {
  auto cfg = resolve_config(f.model);
  auto scenes = load_scenes(f.scenes);
  auto model = make_model(cfg.get());
  check(ssmf_model_load(model.get(), f.checkpoint.c_str()), "checkpoint");
  const std::size_t iters = f.iters ? f.iters : ssmf_model_iterations(model.get());
  make_dir(f.out);
  write_config(cfg.get(), f.out);
  auto out = open_out(fs::path(f.out) / "metrics.csv");
  out << "scene,iteration,epe3d,acc3ds,acc3dr,outliers\n";
  const auto files = scene_files(f.scenes);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string id = files[i].stem().string();
    for (std::size_t n = 1; n <= iters; ++n) {
      ssmf_metrics m{};
      check(ssmf_model_evaluate(model.get(), scenes[i].get(), n, &m), "eval " + id);
      out << id << ',' << n << ',' << fmt(m.epe3d) << ',' << fmt(m.acc3ds) << ',' << fmt(m.acc3dr) << ','
          << fmt(m.outliers) << '\n';
    }
  }
  std::cout << "evaluated " << scenes.size() << " scene(s) at iterations 1.." << iters << "\n";
  return kOk;
}

// ---- bench -----------------------------------------------------------------

struct BenchFlags {
  std::vector<std::size_t> lengths{256, 1024, 4096};
  std::vector<std::size_t> state_sizes{4, 16};
  std::size_t repeats = 5;
  std::size_t channels = 16;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_bench(const BenchFlags& f) {
  make_dir(f.out);
  auto out = open_out(fs::path(f.out) / "bench.csv");
  out << "kernel,L,S,ns_per_element,max_abs_diff\n";
  bool ok = true;
  for (std::size_t s : f.state_sizes) {
    for (std::size_t l : f.lengths) {
      ssmf_bench_row rows[3];
      check(ssmf_bench_scan(l, s, f.channels, f.repeats, f.seed, rows), "bench");
      for (const auto& r : rows) {
        out << r.kernel << ',' << r.length << ',' << r.state_size << ',' << fmt(r.ns_per_element) << ','
            << fmt(r.max_abs_diff) << '\n';
        std::cout << r.kernel << " L=" << r.length << " S=" << r.state_size << " ns/elem=" << fmt(r.ns_per_element)
                  << " max_abs_diff=" << fmt(r.max_abs_diff) << "\n";
        if (!(r.max_abs_diff < 1e-9)) ok = false;
      }
    }
  }
  if (!ok) {
    std::cerr << "error: scan implementations disagree by 1e-9 or more\n";
    return kBenchFailure;
  }
  return kOk;
}

// ---- ablate ----------------------------------------------------------------

struct AblateFlags {
  ModelFlags model;
  std::vector<std::string> variants{"conv-gru", "mamba-uni", "bimamba", "isu", "isu-fio"};
  std::size_t seeds = 3;
  std::size_t scenes = 20;
  std::size_t points = 128;
  std::size_t steps = 800;
  std::uint64_t scene_seed = 1000;
  std::string out;
};

int cmd_ablate(const AblateFlags& f) {
  make_dir(f.out);
  // Fixed suite: the same scenes for every variant and seed.
  ssmf_scene_spec spec;
  ssmf_scene_spec_default(&spec);
  spec.points = f.points;
  std::vector<ScenePtr> suite;
  std::vector<ssmf_scene*> raw;
  for (std::size_t i = 0; i < f.scenes; ++i) {
    ssmf_scene* s = nullptr;
    check(ssmf_scene_generate(&spec, f.scene_seed + i, &s), "ablate suite");
    suite.emplace_back(s);
    raw.push_back(s);
  }

  auto out = open_out(fs::path(f.out) / "ablation.csv");
  out << "variant,seed,mean_epe3d\n";
  std::map<std::string, double> means;
  bool config_written = false;
  for (const auto& variant : f.variants) {
    double total = 0.0;
    for (std::size_t k = 0; k < f.seeds; ++k) {
      ModelFlags mf = f.model;
      mf.update = variant;
      mf.seed = static_cast<long long>(k + 1);
      mf.sets.push_back("steps=" + std::to_string(f.steps));
      mf.sets.push_back("points=" + std::to_string(f.points) + "," + std::to_string(f.points / 4));
      auto cfg = resolve_config(mf);
      if (!config_written) {
        write_config(cfg.get(), f.out);
        config_written = true;
      }
      auto model = make_model(cfg.get());
      const std::size_t batch = std::stoull(config_value(cfg.get(), "batch"));
      train_loop(model.get(), raw, f.steps, batch, nullptr);
      double epe = 0.0;
      for (auto* scene : raw) {
        ssmf_metrics m{};
        check(ssmf_model_evaluate(model.get(), scene, 0, &m), "ablate eval");
        epe += m.epe3d;
      }
      epe /= static_cast<double>(raw.size());
      total += epe;
      out << variant << ',' << (k + 1) << ',' << fmt(epe) << '\n';
      out.flush();
      std::cout << variant << " seed " << (k + 1) << " mean epe3d " << fmt(epe) << "\n";
    }
    means[variant] = total / static_cast<double>(f.seeds);
  }
  for (const auto& variant : f.variants) {
    out << variant << ",mean," << fmt(means[variant]) << '\n';
    std::cout << variant << " mean over seeds " << fmt(means[variant]) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ssmflow: scene flow with state-space iterative updates"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* g = app.add_subcommand("gen", "generate synthetic scenes");
  g->add_option("--objects", gen.objects, "objects per scene");
  g->add_option("--points", gen.points, "points per scene");
  g->add_option("--transform", gen.transform, "identity, translate, rotate30, rigid");
  g->add_option("--magnitude", gen.magnitude, "translation magnitude");
  g->add_option("--noise", gen.noise, "Gaussian noise sigma on the second frame");
  g->add_option("--occlusion", gen.occlusion, "fraction of second-frame points dropped");
  g->add_option("--count", gen.count, "number of scenes");
  g->add_option("--seed", gen.seed, "seed of the first scene; scene i uses seed + i");
  g->add_option("--out", gen.out, "output directory")->required();

  TrainFlags train;
  auto* t = app.add_subcommand("train", "train on a scene directory");
  add_model_flags(t, train.model);
  t->add_option("--scenes", train.scenes, "scene directory")->required();
  t->add_option("--steps", train.steps, "optimizer steps (overrides config)");
  t->add_option("--out", train.out, "output directory")->required();

  EvalFlags eval;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint per iteration count");
  add_model_flags(e, eval.model);
  e->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  e->add_option("--scenes", eval.scenes, "scene directory")->required();
  e->add_option("--iters", eval.iters, "largest iteration count to report (default: config iters)");
  e->add_option("--out", eval.out, "output directory")->required();

  BenchFlags bench;
  auto* b = app.add_subcommand("bench", "time the scan implementations");
  b->add_option("--lengths", bench.lengths, "sequence lengths")->delimiter(',');
  b->add_option("--state-sizes", bench.state_sizes, "state sizes")->delimiter(',');
  b->add_option("--repeats", bench.repeats, "repeats per row (>= 3)");
  b->add_option("--channels", bench.channels, "independent channels");
  b->add_option("--seed", bench.seed, "seed for the random SSM");
  b->add_option("--out", bench.out, "output directory")->required();

  AblateFlags ablate;
  auto* a = app.add_subcommand("ablate", "train and evaluate each update operator");
  add_model_flags(a, ablate.model);
  a->add_option("--variants", ablate.variants, "update operators")->delimiter(',');
  a->add_option("--seeds", ablate.seeds, "training seeds per variant");
  a->add_option("--scenes", ablate.scenes, "scenes in the suite");
  a->add_option("--points", ablate.points, "points per scene");
  a->add_option("--steps", ablate.steps, "training steps per run");
  a->add_option("--scene-seed", ablate.scene_seed, "seed of the first suite scene");
  a->add_option("--out", ablate.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen);
    if (t->parsed()) return cmd_train(train);
    if (e->parsed()) return cmd_eval(eval);
    if (b->parsed()) return cmd_bench(bench);
    if (a->parsed()) return cmd_ablate(ablate);
  } catch (const Exit& ex) {
    std::cerr << "error: " << ex.message << "\n";
    return ex.code;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kIo;
  }
  return kUsage;
}
