#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scarcenet/heatmap.hpp"

namespace scarcenet {

/// Mean squared error over the cells of channel j.
double joint_mse(const HeatmapStack& pred, const HeatmapStack& target, int j);

/// (1/J) * sum of per-joint MSE over visible joints.
double supervised_loss(const HeatmapStack& pred, const HeatmapStack& gt,
                       const std::vector<bool>& visible);

/// Nearest-rank percentile: the element at 1-based rank ceil(c/100 * n) of
/// the ascending order. Throws std::invalid_argument on an empty list or c
/// outside (0, 100].
double percentile_threshold(std::span<const double> losses, double c);

enum class JointState : std::uint8_t { kUnused = 0, kReliable, kReusable };

/// Per sample, per joint selection state.
struct SelectionMask {
  std::vector<std::vector<JointState>> states;

  SelectionMask() = default;
  SelectionMask(std::size_t samples, int joints)
      : states(samples, std::vector<JointState>(static_cast<std::size_t>(joints), JointState::kUnused)) {}

  std::size_t count(JointState s) const;
};

/// Loss value plus d(loss)/d(prediction) for every sample of a batch.
struct BatchLoss {
  double value = 0.0;
  std::vector<HeatmapStack> grad;
};

BatchLoss supervised_batch_loss(std::span<const HeatmapStack> preds,
                                std::span<const HeatmapStack> targets,
                                const std::vector<std::vector<bool>>& visible);

struct PseudoSelection {
  BatchLoss loss;
  double threshold = 0.0;
  std::vector<double> joint_losses;  // pooled valid joint losses, batch order
  SelectionMask mask;                // kReliable where selected
};

/// Small-loss selection over every valid joint in the batch: joints whose loss
/// lies strictly below the c-th percentile are RELIABLE and the loss is their
/// mean. No selected joint gives a zero loss.
PseudoSelection reliable_pseudo_loss(std::span<const HeatmapStack> preds,
                                     std::span<const HeatmapStack> pseudo_targets,
                                     const std::vector<std::vector<bool>>& valid, double c);

/// Mean per-joint MSE over the joints marked kReusable; zero when there are none.
BatchLoss reusable_loss(std::span<const HeatmapStack> preds,
                        std::span<const HeatmapStack> relabel_targets, const SelectionMask& mask);

/// Batch mean of (1/J) * sum_j MSE(aligned teacher_j, student_j). Teacher maps
/// must already be warped into the student frame and are constants.
BatchLoss consistency_loss(std::span<const HeatmapStack> student_preds,
                           std::span<const HeatmapStack> aligned_teacher);

/// Single-sample form that performs the alignment itself.
double consistency_loss(const HeatmapStack& student_pred, const HeatmapStack& teacher_pred,
                        const AffineTransform& p_g);

struct LossWeights {
  double lambda1 = 2.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double lambda4 = 2.0;

  bool operator==(const LossWeights&) const = default;
};

double total_loss(double ls, double lp, double lr, double lt, const LossWeights& w);

}  // namespace scarcenet
