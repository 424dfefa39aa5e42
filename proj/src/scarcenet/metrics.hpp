#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scarcenet/geometry.hpp"
#include "scarcenet/posenet.hpp"
#include "scarcenet/synthcritters.hpp"

namespace scarcenet {

enum class PckNormalizer {
  kBoundingBox,  // max side of the tight box around visible ground-truth joints
  kImageSide,    // max(image width, image height)
};

struct KeypointSet {
  int sample_id = 0;
  int species_id = 0;
  Keypoints keypoints;
};

struct PckRate {
  std::size_t correct = 0;
  std::size_t total = 0;

  double rate() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

struct PckReport {
  double tau = 0.0;
  std::vector<PckRate> per_joint;
  std::map<int, PckRate> per_species;
  PckRate overall;
};

/// Only ground-truth-visible joints are scored; a joint counts as correct iff
/// its prediction is visible and within tau * normalizer (inclusive).
/// Predictions and ground truths are matched by position and must carry the
/// same sample ids; otherwise DataError.
PckReport pck(std::span<const KeypointSet> preds, std::span<const KeypointSet> gts, double tau,
              PckNormalizer normalizer = PckNormalizer::kBoundingBox, double image_side = kImageSize);

double pck_normalizer(const Keypoints& gt, PckNormalizer normalizer, double image_side);

struct Evaluation {
  std::vector<KeypointSet> predictions;
  PckReport pck05;
  PckReport pck10;
};

/// Deterministic inference over `samples` (no augmentation).
Evaluation evaluate(const ModelParams& model, std::span<const LabeledSample> samples,
                    PckNormalizer normalizer = PckNormalizer::kBoundingBox);

/// scope,name,pck05,pck10,count rows: one per joint, one per species, then
/// the overall row.
std::string format_evaluation_csv(const Evaluation& e, const std::vector<std::string>& joint_names);

}  // namespace scarcenet
