#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scarcenet/config.hpp"
#include "scarcenet/geometry.hpp"
#include "scarcenet/losses.hpp"
#include "scarcenet/posenet.hpp"
#include "scarcenet/synthcritters.hpp"

namespace scarcenet {

struct PseudoLabel {
  int sample_id = 0;
  std::vector<Point> coords;  // image pixels
  std::vector<double> confidence;
  std::vector<bool> valid;

  bool operator==(const PseudoLabel&) const = default;
};

/// Confidence is the decoded channel maximum clamped to [0, 1]; a joint is
/// valid iff its confidence reaches tau_conf.
PseudoLabel make_pseudo_label(int sample_id, const HeatmapStack& output, double tau_conf);

std::vector<PseudoLabel> generate_pseudo_labels(const ModelParams& model,
                                                std::span<const UnlabeledSample> samples,
                                                double tau_conf);

/// JSON lines: {"sample_id": n, "joints": [[x, y, confidence, valid], ...]}.
void write_pseudo_labels(const std::filesystem::path& path, std::span<const PseudoLabel> labels);
std::vector<PseudoLabel> read_pseudo_labels(const std::filesystem::path& path);

struct AgreementResult {
  std::vector<double> distances;  // squared, heatmap pixels; infinity if a view lost the joint
  std::vector<bool> agree;        // distance < d_r
  Keypoints view1;                // decoded on the untransformed image, image pixels
  Keypoints view2;                // decoded on the transformed image
};

/// Two-view agreement of `model` under the weak transform `t` (no flip).
/// Throws DegenerateTransform for a singular `t`.
AgreementResult agreement_check(const ModelParams& model, const ImageTensor& image,
                                const AffineTransform& t, double d_r);

/// Same, with the two network outputs already computed.
AgreementResult agreement_from_outputs(const HeatmapStack& view1, const HeatmapStack& view2,
                                       const AffineTransform& t, double d_r);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss_s = 0.0;
  double loss_p = 0.0;
  double loss_r = 0.0;
  double loss_t = 0.0;
  std::size_t n_reliable = 0;
  std::size_t n_reusable = 0;
  std::optional<double> val_pck05;  // only on evaluation epochs
  std::optional<double> val_pck10;
};

std::string format_epoch_log(std::span<const EpochLog> rows);

/// Optional observers. `on_step` sees the parameters right after each
/// optimizer step (and EMA update in stage 2; teacher is null without one).
struct TrainHooks {
  std::function<void(const std::string&)> message;
  std::function<void(std::int64_t step, const ModelParams& student, const ModelParams* teacher)> on_step;
  std::ostream* mask_log = nullptr;  // stage 2 selection masks, JSON lines
};

struct Stage1Result {
  ModelParams best;   // highest validation PCK@0.1; the final model without validation data
  ModelParams final_model;
  int best_epoch = -1;
  std::vector<EpochLog> log;
};

/// Supervised training on the labeled images with per-sample augmentation.
/// Throws DataError when `labeled` is empty.
Stage1Result train_stage1(const TrainConfig& cfg, std::span<const LabeledSample> labeled,
                          std::span<const LabeledSample> val, const TrainHooks& hooks = {});

struct Stage2Result {
  ModelParams student;
  std::optional<ModelParams> teacher;
  std::vector<EpochLog> log;
};

/// Semi-supervised stage. Every unlabeled sample needs a pseudo label with a
/// matching sample id (DataError otherwise).
Stage2Result train_stage2(const TrainConfig& cfg, std::span<const LabeledSample> labeled,
                          std::span<const UnlabeledSample> unlabeled,
                          std::span<const PseudoLabel> pseudo, const ModelParams& stage1,
                          std::span<const LabeledSample> val, const TrainHooks& hooks = {});

/// One line of the stage-2 mask log. States are indexed by the joints of the
/// original (unaugmented) image: 0 unused, 1 reliable, 2 reusable.
struct MaskLogEntry {
  int epoch = 0;
  std::int64_t step = 0;
  std::vector<int> sample_ids;
  std::vector<std::vector<JointState>> states;
};

std::vector<MaskLogEntry> read_mask_log(const std::filesystem::path& path);

}  // namespace scarcenet
