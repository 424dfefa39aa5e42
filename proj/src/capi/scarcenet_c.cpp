#include "scarcenet/scarcenet.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <new>
#include <stdexcept>
#include <string>

#include "scarcenet/config.hpp"
#include "scarcenet/errors.hpp"
#include "scarcenet/experiment.hpp"
#include "scarcenet/metrics.hpp"
#include "scarcenet/parallel.hpp"
#include "scarcenet/plot.hpp"
#include "scarcenet/posenet.hpp"
#include "scarcenet/scarcelearn.hpp"
#include "scarcenet/synthcritters.hpp"

struct sn_config {
  scarcenet::TrainConfig cfg;
};

struct sn_model {
  scarcenet::ModelParams params;
};

namespace {

namespace fs = std::filesystem;
using namespace scarcenet;

thread_local std::string g_last_error;

std::mutex g_log_mu;
sn_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void log_message(const std::string& m) {
  std::lock_guard lock(g_log_mu);
  if (g_log_fn) g_log_fn(m.c_str(), g_log_user);
}

TrainHooks logging_hooks() {
  TrainHooks h;
  h.message = log_message;
  return h;
}

template <typename F>
sn_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return SN_OK;
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return SN_ERR_CONFIG;
  } catch (const DataError& e) {
    g_last_error = e.what();
    return SN_ERR_DATA;
  } catch (const NumericError& e) {
    g_last_error = e.what();
    return SN_ERR_NUMERIC;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return SN_ERR_CONFIG;
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return SN_ERR_DATA;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SN_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SN_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string(what) + " must not be NULL");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

LoadedData load_dir(const char* data_dir) {
  require(data_dir, "data_dir");
  return load_data(DatasetLoader(data_dir));
}

fs::path resolve_checkpoint(const fs::path& given, bool use_teacher) {
  fs::path dir = fs::is_directory(given) ? given : given.parent_path();
  if (use_teacher && fs::exists(dir / "teacher.ckpt")) return dir / "teacher.ckpt";
  if (fs::is_directory(given)) {
    if (fs::exists(given / "student.ckpt")) return given / "student.ckpt";
    if (fs::exists(given / "stage1.ckpt")) return given / "stage1.ckpt";
    throw DataError("no checkpoint found in " + given.string());
  }
  return given;
}

}  // namespace

extern "C" {

const char* sn_version(void) { return "0.1.0"; }

const char* sn_last_error(void) { return g_last_error.c_str(); }

void sn_set_log_callback(sn_log_fn fn, void* user) {
  std::lock_guard lock(g_log_mu);
  g_log_fn = fn;
  g_log_user = user;
}

void sn_set_num_threads(int n) { set_num_threads(n); }

sn_status sn_config_new(sn_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new sn_config{};
  });
}

sn_status sn_config_load(const char* path, sn_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new sn_config{load_config(path)};
  });
}

sn_status sn_config_parse(const char* text, sn_config** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new sn_config{parse_config(text)};
  });
}

sn_status sn_config_set(sn_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    TrainConfig next = cfg->cfg;
    next.set(key, value);
    next.validate();
    cfg->cfg = next;
  });
}

sn_status sn_config_get(const sn_config* cfg, const char* key, char* buf, size_t buflen, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    const std::string v = cfg->cfg.get(key);
    if (needed) *needed = v.size() + 1;
    if (buf && buflen > v.size()) std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

sn_status sn_config_save(const sn_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    save_config(path, cfg->cfg);
  });
}

void sn_config_free(sn_config* cfg) { delete cfg; }

sn_status sn_dataset_generate(int species, int per_species, uint64_t seed, const char* out_dir) {
  return guarded([&] {
    require(out_dir, "out_dir");
    if (species < 1) throw std::invalid_argument("species must be >= 1");
    if (per_species < 1) throw std::invalid_argument("per_species must be >= 1");
    const DatasetManifest m = build_dataset(species, per_species, seed);
    log_message("rendering " + std::to_string(m.records.size()) + " images into " + out_dir);
    write_dataset(out_dir, m);
  });
}

sn_status sn_dataset_split(const char* manifest, int labels_per_species, const int* family_group,
                           size_t group_len, uint64_t seed, const char* out_manifest) {
  return guarded([&] {
    require(manifest, "manifest");
    const DatasetManifest m = read_manifest(manifest);
    DatasetManifest split;
    if (family_group) {
      if (group_len == 0) throw std::invalid_argument("family group must not be empty");
      split = split_scarce(m, 0, SplitMode::kFamilyTransfer, seed,
                           std::vector<int>(family_group, family_group + group_len));
    } else {
      split = split_scarce(m, labels_per_species, SplitMode::kPerSpecies, seed);
    }
    write_manifest(out_manifest ? out_manifest : manifest, split);
    log_message(std::to_string(split.count(Split::kLabeled)) + " labeled, " +
                std::to_string(split.count(Split::kUnlabeled)) + " unlabeled training records");
  });
}

sn_status sn_train_stage1(const sn_config* cfg, const char* data_dir, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    const LoadedData data = load_dir(data_dir);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    const Stage1Result r = train_stage1(cfg->cfg, data.labeled, data.val, logging_hooks());
    save_checkpoint(out / "stage1.ckpt", r.best);
    save_checkpoint(out / "stage1_final.ckpt", r.final_model);
    write_text(out / "stage1_log.csv", format_epoch_log(r.log));
    save_config(out / "config.txt", cfg->cfg);
    log_message("stage 1 done, best epoch " + std::to_string(r.best_epoch + 1));
  });
}

sn_status sn_pseudo_label(const char* checkpoint, const char* data_dir, double tau_conf, const char* out_path) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(data_dir, "data_dir");
    require(out_path, "out_path");
    if (!(tau_conf >= 0.0)) throw std::invalid_argument("tau_conf must be >= 0");
    const ModelParams model = load_checkpoint(checkpoint);
    const auto unlabeled = DatasetLoader(data_dir).unlabeled();
    const auto labels = generate_pseudo_labels(model, unlabeled, tau_conf);
    write_pseudo_labels(out_path, labels);
    std::size_t valid = 0, total = 0;
    for (const auto& pl : labels)
      for (const bool v : pl.valid) valid += v, ++total;
    log_message(std::to_string(labels.size()) + " pseudo labels, " + std::to_string(valid) + "/" +
                std::to_string(total) + " joints valid");
  });
}

sn_status sn_train_stage2(const sn_config* cfg, const char* data_dir, const char* stage1_checkpoint,
                          const char* pseudo_labels, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(stage1_checkpoint, "stage1_checkpoint");
    require(pseudo_labels, "pseudo_labels");
    require(out_dir, "out_dir");
    const LoadedData data = load_dir(data_dir);
    const ModelParams stage1 = load_checkpoint(stage1_checkpoint);
    const auto pseudo = read_pseudo_labels(pseudo_labels);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    std::ofstream masks(out / "masks.jsonl", std::ios::binary);
    if (!masks) throw DataError("cannot write " + (out / "masks.jsonl").string());
    TrainHooks hooks = logging_hooks();
    hooks.mask_log = &masks;
    const Stage2Result r = train_stage2(cfg->cfg, data.labeled, data.unlabeled, pseudo, stage1, data.val, hooks);
    save_checkpoint(out / "student.ckpt", r.student);
    if (r.teacher) {
      save_checkpoint(out / "teacher.ckpt", *r.teacher);
    } else {
      fs::remove(out / "teacher.ckpt");
    }
    write_text(out / "stage2_log.csv", format_epoch_log(r.log));
    save_config(out / "config.txt", cfg->cfg);
  });
}

sn_status sn_evaluate(const char* checkpoint, const char* data_dir, const char* split, int use_teacher,
                      const char* csv_out, double* pck05, double* pck10) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(data_dir, "data_dir");
    require(split, "split");
    const std::string name = split;
    if (name != "val" && name != "test") throw std::invalid_argument("split must be val or test");
    const Split s = parse_split(name);
    const fs::path path = resolve_checkpoint(checkpoint, use_teacher != 0);
    log_message("evaluating " + path.string());
    const ModelParams model = load_checkpoint(path);
    const auto samples = DatasetLoader(data_dir).annotated(s);
    const Evaluation e = evaluate(model, samples);
    if (csv_out) write_text(csv_out, format_evaluation_csv(e, creature_skeleton().names));
    if (pck05) *pck05 = e.pck05.overall.rate();
    if (pck10) *pck10 = e.pck10.overall.rate();
  });
}

sn_status sn_ablate(const sn_config* cfg, const char* toggles, const uint64_t* seeds, size_t n_seeds,
                    const char* data_dir, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(toggles, "toggles");
    require(seeds, "seeds");
    require(out_dir, "out_dir");
    const LoadedData data = load_dir(data_dir);
    const AblationResult r = run_ablation(cfg->cfg, parse_toggles(toggles),
                                          std::vector<std::uint64_t>(seeds, seeds + n_seeds), data,
                                          fs::path(out_dir), logging_hooks());
    log_message(format_ablation_table(r));
  });
}

sn_status sn_plot(const char* metrics_csv, const char* svg_out) {
  return guarded([&] {
    require(metrics_csv, "metrics_csv");
    require(svg_out, "svg_out");
    plot_metrics(metrics_csv, svg_out);
  });
}

sn_status sn_model_init(int joints, int shared_head, uint64_t seed, sn_model** out) {
  return guarded([&] {
    require(out, "out");
    if (joints < 1) throw std::invalid_argument("joints must be >= 1");
    const ModelSpec spec{joints, shared_head ? HeadType::kShared : HeadType::kMultiBranch};
    *out = new sn_model{init_model(spec, seed)};
  });
}

sn_status sn_model_load(const char* path, sn_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new sn_model{load_checkpoint(path)};
  });
}

sn_status sn_model_save(const sn_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    save_checkpoint(path, model->params);
  });
}

int sn_model_joints(const sn_model* model) { return model ? model->params.spec().joints : 0; }

size_t sn_model_parameter_count(const sn_model* model) {
  return model ? model->params.parameter_count() : 0;
}

sn_status sn_model_predict(const sn_model* model, const float* image, int height, int width, float* xy,
                           float* scores) {
  return guarded([&] {
    require(model, "model");
    require(image, "image");
    require(xy, "xy");
    if (height <= 0 || width <= 0) throw std::invalid_argument("image size must be positive");
    ImageTensor img(3, height, width);
    std::copy_n(image, img.values().size(), img.values().begin());
    const Decoded d = decode(forward(model->params, img));
    for (std::size_t j = 0; j < d.keypoints.size(); ++j) {
      xy[2 * j] = static_cast<float>(d.keypoints.coords[j].x);
      xy[2 * j + 1] = static_cast<float>(d.keypoints.coords[j].y);
      if (scores) scores[j] = d.scores[j];
    }
  });
}

void sn_model_free(sn_model* model) { delete model; }

}  // extern "C"
