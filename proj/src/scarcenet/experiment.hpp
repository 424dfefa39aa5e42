#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scarcenet/config.hpp"
#include "scarcenet/metrics.hpp"
#include "scarcenet/scarcelearn.hpp"
#include "scarcenet/synthcritters.hpp"

namespace scarcenet {

/// Components that can be switched off for an ablation run.
enum class Toggle {
  kRsr,  // reusable-sample re-labeling: lambda3 = 0
  kMt,   // mean teacher: lambda4 = 0 and no teacher network
  kMb,   // multi-branch head: one shared 1x1 head instead
  kAug,  // strong augmentation replaced by weak everywhere
  kSsl,  // all unlabeled losses: lambda2 = lambda3 = lambda4 = 0
};

std::string to_string(Toggle t);
/// Parses a comma-separated list such as "rsr,mt"; ConfigError on unknown names.
std::vector<Toggle> parse_toggles(const std::string& list);
TrainConfig apply_toggle(TrainConfig cfg, Toggle t);

struct LoadedData {
  std::vector<LabeledSample> labeled;
  std::vector<UnlabeledSample> unlabeled;
  std::vector<LabeledSample> val;
  std::vector<LabeledSample> test;
};

LoadedData load_data(const DatasetLoader& loader);

struct PipelineResult {
  Stage1Result stage1;
  std::vector<PseudoLabel> pseudo;
  Stage2Result stage2;
  Evaluation test;  // teacher when present, student otherwise
};

/// Stage 1, pseudo labels, stage 2 and test evaluation. A precomputed stage-1
/// result can be supplied to skip the first stage.
PipelineResult run_pipeline(const TrainConfig& cfg, const LoadedData& data, const TrainHooks& hooks = {},
                            const Stage1Result* stage1 = nullptr);

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  double pck05 = 0.0;
  double pck10 = 0.0;
};

struct AblationRow {
  std::string variant;
  std::size_t runs = 0;
  double pck05_mean = 0.0;
  double pck05_std = 0.0;
  double pck10_mean = 0.0;
  double pck10_std = 0.0;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  std::vector<AblationRow> table;  // "full" first, then one row per toggle
};

/// Runs the full model and every single-toggle variant for every seed. Stage 1
/// is shared between variants with the same head, augmentation and seed.
/// When `out_dir` is set, per-run logs and the summary tables are written there.
AblationResult run_ablation(const TrainConfig& base, const std::vector<Toggle>& toggles,
                            const std::vector<std::uint64_t>& seeds, const LoadedData& data,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                            const TrainHooks& hooks = {});

/// variant,runs,pck05_mean,pck05_std,pck10_mean,pck10_std
std::string format_ablation_csv(const AblationResult& r);
/// Human-readable table with mean +- std columns.
std::string format_ablation_table(const AblationResult& r);

}  // namespace scarcenet
