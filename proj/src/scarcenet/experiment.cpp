#include "scarcenet/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "scarcenet/errors.hpp"

namespace scarcenet {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (const double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (const double x : v) var += (x - mean) * (x - mean);
  // sample standard deviation; a single run has none
  const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  return {mean, sd};
}

}  // namespace

std::string to_string(Toggle t) {
  switch (t) {
    case Toggle::kRsr: return "rsr";
    case Toggle::kMt: return "mt";
    case Toggle::kMb: return "mb";
    case Toggle::kAug: return "aug";
    case Toggle::kSsl: return "ssl";
  }
  return "?";
}

std::vector<Toggle> parse_toggles(const std::string& list) {
  std::vector<Toggle> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    bool found = false;
    for (const Toggle t : {Toggle::kRsr, Toggle::kMt, Toggle::kMb, Toggle::kAug, Toggle::kSsl})
      if (to_string(t) == item) {
        if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
        found = true;
      }
    if (!found) throw ConfigError("unknown ablation toggle '" + item + "' (expected rsr, mt, mb, aug, ssl)");
  }
  return out;
}

TrainConfig apply_toggle(TrainConfig cfg, Toggle t) {
  switch (t) {
    case Toggle::kRsr:
      cfg.weights.lambda3 = 0.0;
      break;
    case Toggle::kMt:
      cfg.weights.lambda4 = 0.0;
      cfg.mean_teacher = false;
      cfg.agreement_net = AgreementNet::kStudent;
      break;
    case Toggle::kMb:
      cfg.head = HeadType::kShared;
      break;
    case Toggle::kAug:
      cfg.augmentation = AugmentMode::kWeak;
      break;
    case Toggle::kSsl:
      cfg.weights.lambda2 = cfg.weights.lambda3 = cfg.weights.lambda4 = 0.0;
      break;
  }
  return cfg;
}

LoadedData load_data(const DatasetLoader& loader) {
  return {loader.annotated(Split::kLabeled), loader.unlabeled(), loader.annotated(Split::kVal),
          loader.annotated(Split::kTest)};
}

PipelineResult run_pipeline(const TrainConfig& cfg, const LoadedData& data, const TrainHooks& hooks,
                            const Stage1Result* stage1) {
  PipelineResult r;
  r.stage1 = stage1 ? *stage1 : train_stage1(cfg, data.labeled, data.val, hooks);
  r.pseudo = generate_pseudo_labels(r.stage1.best, data.unlabeled, cfg.tau_conf);
  r.stage2 = train_stage2(cfg, data.labeled, data.unlabeled, r.pseudo, r.stage1.best, data.val, hooks);
  const ModelParams& final_model = r.stage2.teacher ? *r.stage2.teacher : r.stage2.student;
  r.test = evaluate(final_model, data.test, cfg.pck_normalizer);
  return r;
}

AblationResult run_ablation(const TrainConfig& base, const std::vector<Toggle>& toggles,
                            const std::vector<std::uint64_t>& seeds, const LoadedData& data,
                            const std::optional<std::filesystem::path>& out_dir, const TrainHooks& hooks) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  std::vector<std::pair<std::string, TrainConfig>> variants{{"full", base}};
  for (const Toggle t : toggles) variants.emplace_back("-" + to_string(t), apply_toggle(base, t));
  if (out_dir) std::filesystem::create_directories(*out_dir);

  AblationResult result;
  std::map<std::tuple<HeadType, AugmentMode, std::uint64_t>, Stage1Result> stage1_cache;
  for (const auto& [name, variant_cfg] : variants) {
    std::vector<double> p05, p10;
    for (const std::uint64_t seed : seeds) {
      TrainConfig cfg = variant_cfg;
      cfg.seed = seed;
      if (hooks.message) hooks.message("ablation: variant " + name + " seed " + std::to_string(seed));
      const auto key = std::make_tuple(cfg.head, cfg.augmentation, seed);
      auto cached = stage1_cache.find(key);
      if (cached == stage1_cache.end())
        cached = stage1_cache.emplace(key, train_stage1(cfg, data.labeled, data.val, hooks)).first;
      const PipelineResult pr = run_pipeline(cfg, data, hooks, &cached->second);
      const AblationRun run{name, seed, pr.test.pck05.overall.rate(), pr.test.pck10.overall.rate()};
      result.runs.push_back(run);
      p05.push_back(run.pck05);
      p10.push_back(run.pck10);
      if (out_dir) {
        const std::string stem = name + "_seed" + std::to_string(seed);
        write_text(*out_dir / (stem + "_stage2.csv"), format_epoch_log(pr.stage2.log));
        write_text(*out_dir / (stem + "_test.csv"), format_evaluation_csv(pr.test, creature_skeleton().names));
      }
    }
    AblationRow row;
    row.variant = name;
    row.runs = seeds.size();
    std::tie(row.pck05_mean, row.pck05_std) = mean_std(p05);
    std::tie(row.pck10_mean, row.pck10_std) = mean_std(p10);
    result.table.push_back(row);
  }
  if (out_dir) {
    write_text(*out_dir / "ablation.csv", format_ablation_csv(result));
    write_text(*out_dir / "ablation.txt", format_ablation_table(result));
  }
  return result;
}

std::string format_ablation_csv(const AblationResult& r) {
  std::string out = "variant,runs,pck05_mean,pck05_std,pck10_mean,pck10_std\n";
  char buf[200];
  for (const auto& row : r.table) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f,%.6f\n", row.variant.c_str(), row.runs,
                  row.pck05_mean, row.pck05_std, row.pck10_mean, row.pck10_std);
    out += buf;
  }
  return out;
}

std::string format_ablation_table(const AblationResult& r) {
  std::string out = "variant    runs  PCK@0.05          PCK@0.1\n";
  char buf[200];
  for (const auto& row : r.table) {
    std::snprintf(buf, sizeof(buf), "%-10s %4zu  %.4f +- %.4f  %.4f +- %.4f\n", row.variant.c_str(), row.runs,
                  row.pck05_mean, row.pck05_std, row.pck10_mean, row.pck10_std);
    out += buf;
  }
  return out;
}

}  // namespace scarcenet
