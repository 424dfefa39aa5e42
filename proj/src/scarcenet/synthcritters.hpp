#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scarcenet/geometry.hpp"
#include "scarcenet/image.hpp"

namespace scarcenet {

inline constexpr int kImageSize = 64;

/// Quadruped keypoint layout. "Left" limbs are the ones on the camera side
/// when the creature faces +x.
enum Joint : int {
  kHip = 0,
  kShoulder,
  kHead,
  kTailTip,
  kLeftFrontFoot,
  kRightFrontFoot,
  kLeftBackFoot,
  kRightBackFoot,
  kNumJoints
};

struct Skeleton {
  int joints = kNumJoints;
  std::vector<std::pair<int, int>> bones;  // parent -> child, rooted at hip
  FlipPairs flip_pairs;
  std::vector<std::string> names;
};

const Skeleton& creature_skeleton();

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct SpeciesParams {
  int species_id = 0;
  Range torso_length;
  Range neck_length;
  Range leg_length;
  Range tail_length;
  double head_radius = 4.0;
  double limb_thickness = 3.0;
  double torso_thickness = 6.0;
  std::array<float, 3> base_color{};
  double texture_noise = 0.05;
  int background_style = 0;
};

/// Deterministic function of the species id alone, so that a manifest record
/// (species_id, seed) is enough to re-render its image.
SpeciesParams species_params(int species_id);

struct CreatureSample {
  RgbImage image;
  Keypoints keypoints;
};

CreatureSample sample_creature(const SpeciesParams& sp, std::uint64_t seed);

/// Background-only render for the same (species, seed); used to probe that
/// joints are actually drawn.
RgbImage render_background(const SpeciesParams& sp, std::uint64_t seed);

enum class Split { kLabeled, kUnlabeled, kVal, kTest };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestRecord {
  int sample_id = 0;
  int species_id = 0;
  std::uint64_t seed = 0;
  std::string path;  // relative to the dataset directory
  Split split = Split::kLabeled;
  Keypoints keypoints;

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  std::size_t count(Split s) const;
  bool operator==(const DatasetManifest&) const = default;
};

/// per_species samples for each species with a 7:1:2 train/val/test split per
/// species; training records start out tagged `labeled`.
DatasetManifest build_dataset(int n_species, int per_species, std::uint64_t seed);

enum class SplitMode { kPerSpecies, kFamilyTransfer };

/// Re-tags training records as labeled/unlabeled. Per-species mode labels
/// `labels_per_species` random training images of every species;
/// family-transfer labels all training images of `labeled_species`.
DatasetManifest split_scarce(const DatasetManifest& m, int labels_per_species, SplitMode mode,
                             std::uint64_t seed, const std::vector<int>& labeled_species = {0});

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Renders and stores every image plus `manifest.jsonl` under `dir`.
void write_dataset(const std::filesystem::path& dir, const DatasetManifest& m);

inline const char* kManifestName = "manifest.jsonl";

// Training-side views. The unlabeled view has no annotation member at all.

struct LabeledSample {
  int sample_id = 0;
  int species_id = 0;
  ImageTensor image;
  Keypoints keypoints;
};

struct UnlabeledSample {
  int sample_id = 0;
  int species_id = 0;
  ImageTensor image;
};

class DatasetLoader {
 public:
  explicit DatasetLoader(std::filesystem::path dir);
  DatasetLoader(std::filesystem::path dir, DatasetManifest manifest);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& dir() const { return dir_; }

  /// `labeled`, `val` and `test` records with their annotations.
  std::vector<LabeledSample> annotated(Split s) const;
  std::vector<UnlabeledSample> unlabeled() const;

 private:
  ImageTensor load(const ManifestRecord& r) const;

  std::filesystem::path dir_;
  DatasetManifest manifest_;
};

}  // namespace scarcenet
