#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scarcenet/augment.hpp"
#include "scarcenet/losses.hpp"
#include "scarcenet/metrics.hpp"
#include "scarcenet/posenet.hpp"

namespace scarcenet {

enum class AgreementNet { kStudent, kTeacher };
enum class AugmentMode { kStrong, kWeak };

/// Every tunable of both training stages. Field names in the config file are
/// listed by TrainConfig::keys().
struct TrainConfig {
  LossWeights weights;
  double small_loss_percentile = 70.0;
  double d_r = 0.6;  // squared distance, heatmap pixels
  double ema_alpha = 0.999;
  double tau_conf = 0.4;

  double lr = 1e-3;
  double lr_drop1 = 170.0 / 210.0;  // fraction of the stage's epochs
  double lr_drop2 = 200.0 / 210.0;
  double lr_decay = 0.1;

  int batch_size = 16;
  double labeled_fraction = 0.25;
  int stage1_epochs = 210;
  int stage2_epochs = 40;
  std::uint64_t seed = 1;
  double sigma = 2.0;
  int eval_every = 5;

  AgreementNet agreement_net = AgreementNet::kStudent;
  HeadType head = HeadType::kMultiBranch;
  AugmentMode augmentation = AugmentMode::kStrong;
  bool mean_teacher = true;
  PckNormalizer pck_normalizer = PckNormalizer::kBoundingBox;

  AugmentRanges augment;

  static const std::vector<std::string>& keys();

  /// Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  /// Learning rate for `epoch` (0-based) of a stage lasting `epochs` epochs.
  double learning_rate(int epoch, int epochs) const;

  bool operator==(const TrainConfig&) const = default;
};

/// Line-oriented `key = value`; '#' starts a comment. Keys not listed in
/// TrainConfig::keys() are a hard error. Missing keys keep their defaults.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
std::string format_config(const TrainConfig& cfg);
void save_config(const std::filesystem::path& path, const TrainConfig& cfg);

}  // namespace scarcenet
