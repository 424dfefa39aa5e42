#pragma once

#include <string>
#include <vector>

#include "scarcenet/geometry.hpp"
#include "scarcenet/image.hpp"
#include "scarcenet/rng.hpp"

namespace scarcenet {

struct AugmentRanges {
  double weak_rotation_deg = 20.0;
  double weak_scale_min = 0.9;
  double weak_scale_max = 1.1;
  double strong_rotation_deg = 30.0;
  double strong_scale_min = 0.75;
  double strong_scale_max = 1.25;
  double strong_flip_prob = 0.5;
  int photometric_ops = 2;

  bool operator==(const AugmentRanges&) const = default;
};

struct PhotometricOp {
  std::string name;
  std::vector<double> params;

  bool operator==(const PhotometricOp&) const = default;
};

struct AugmentedSample {
  ImageTensor image;
  AffineTransform geo;
  std::vector<PhotometricOp> ops_log;  // photometric only

  bool operator==(const AugmentedSample&) const = default;
};

/// Names of the photometric operations strong augmentation draws from.
const std::vector<std::string>& photometric_op_names();

/// Rotation/scale about the image center, sampled uniformly from the weak
/// ranges. No flip, no photometric ops.
AugmentedSample weak_augment(const ImageTensor& img, Rng& rng, const AugmentRanges& ranges = {});

/// Geometric part (rotation, scale, flip) followed by `photometric_ops`
/// distinct image-only ops. Translation and shear are never produced. Cutout,
/// when drawn, is applied last so its rectangle stays constant.
AugmentedSample strong_augment(const ImageTensor& img, Rng& rng, const FlipPairs& flip_pairs,
                               const AugmentRanges& ranges = {});

/// Applies one logged photometric op in place.
void apply_photometric(ImageTensor& img, const PhotometricOp& op, Rng& rng);

}  // namespace scarcenet
