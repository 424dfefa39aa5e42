#include "scarcenet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scarcenet {
namespace {

void require_same_shape(const HeatmapStack& a, const HeatmapStack& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("heatmap shape mismatch");
}

void add_mse_grad(HeatmapStack& grad, const HeatmapStack& pred, const HeatmapStack& target, int j,
                  double coef) {
  const auto p = pred.channel(j);
  const auto t = target.channel(j);
  auto g = grad.channel(j);
  const double scale = 2.0 * coef / static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    g[i] += static_cast<float>(scale * (static_cast<double>(p[i]) - t[i]));
}

HeatmapStack zeros_like(const HeatmapStack& h) {
  return HeatmapStack(h.joints(), h.height(), h.width(), h.resolution_ratio());
}

std::vector<HeatmapStack> zero_grads(std::span<const HeatmapStack> preds) {
  std::vector<HeatmapStack> g;
  g.reserve(preds.size());
  for (const auto& p : preds) g.push_back(zeros_like(p));
  return g;
}

}  // namespace

double joint_mse(const HeatmapStack& pred, const HeatmapStack& target, int j) {
  require_same_shape(pred, target);
  const auto p = pred.channel(j);
  const auto t = target.channel(j);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    acc += d * d;
  }
  return acc / static_cast<double>(p.size());
}

double supervised_loss(const HeatmapStack& pred, const HeatmapStack& gt,
                       const std::vector<bool>& visible) {
  require_same_shape(pred, gt);
  if (visible.size() != static_cast<std::size_t>(pred.joints()))
    throw std::invalid_argument("supervised_loss: visibility length mismatch");
  double acc = 0.0;
  for (int j = 0; j < pred.joints(); ++j)
    if (visible[j]) acc += joint_mse(pred, gt, j);
  return acc / pred.joints();
}

double percentile_threshold(std::span<const double> losses, double c) {
  if (losses.empty()) throw std::invalid_argument("percentile_threshold: empty list");
  if (!(c > 0.0 && c <= 100.0)) throw std::invalid_argument("percentile_threshold: c outside (0, 100]");
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(c * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::size_t SelectionMask::count(JointState s) const {
  std::size_t n = 0;
  for (const auto& row : states) n += static_cast<std::size_t>(std::count(row.begin(), row.end(), s));
  return n;
}

BatchLoss supervised_batch_loss(std::span<const HeatmapStack> preds,
                                std::span<const HeatmapStack> targets,
                                const std::vector<std::vector<bool>>& visible) {
  if (preds.size() != targets.size() || preds.size() != visible.size())
    throw std::invalid_argument("supervised_batch_loss: batch size mismatch");
  BatchLoss out{0.0, zero_grads(preds)};
  if (preds.empty()) return out;
  const double n = static_cast<double>(preds.size());
  for (std::size_t s = 0; s < preds.size(); ++s) {
    out.value += supervised_loss(preds[s], targets[s], visible[s]) / n;
    const double coef = 1.0 / (n * preds[s].joints());
    for (int j = 0; j < preds[s].joints(); ++j)
      if (visible[s][j]) add_mse_grad(out.grad[s], preds[s], targets[s], j, coef);
  }
  return out;
}

PseudoSelection reliable_pseudo_loss(std::span<const HeatmapStack> preds,
                                     std::span<const HeatmapStack> pseudo_targets,
                                     const std::vector<std::vector<bool>>& valid, double c) {
  if (preds.size() != pseudo_targets.size() || preds.size() != valid.size())
    throw std::invalid_argument("reliable_pseudo_loss: batch size mismatch");
  PseudoSelection out;
  out.loss.grad = zero_grads(preds);
  out.mask = SelectionMask(preds.size(), preds.empty() ? 0 : preds[0].joints());

  struct Entry {
    std::size_t sample;
    int joint;
    double loss;
  };
  std::vector<Entry> pool;
  for (std::size_t s = 0; s < preds.size(); ++s)
    for (int j = 0; j < preds[s].joints(); ++j)
      if (valid[s][j]) pool.push_back({s, j, joint_mse(preds[s], pseudo_targets[s], j)});
  if (pool.empty()) return out;

  for (const auto& e : pool) out.joint_losses.push_back(e.loss);
  out.threshold = percentile_threshold(out.joint_losses, c);

  std::size_t selected = 0;
  for (const auto& e : pool)
    if (e.loss < out.threshold) ++selected;
  if (selected == 0) return out;

  const double coef = 1.0 / static_cast<double>(selected);
  for (const auto& e : pool) {
    if (!(e.loss < out.threshold)) continue;
    out.mask.states[e.sample][e.joint] = JointState::kReliable;
    out.loss.value += e.loss * coef;
    add_mse_grad(out.loss.grad[e.sample], preds[e.sample], pseudo_targets[e.sample], e.joint, coef);
  }
  return out;
}

BatchLoss reusable_loss(std::span<const HeatmapStack> preds,
                        std::span<const HeatmapStack> relabel_targets, const SelectionMask& mask) {
  if (preds.size() != relabel_targets.size() || preds.size() != mask.states.size())
    throw std::invalid_argument("reusable_loss: batch size mismatch");
  BatchLoss out{0.0, zero_grads(preds)};
  const std::size_t n = mask.count(JointState::kReusable);
  if (n == 0) return out;
  const double coef = 1.0 / static_cast<double>(n);
  for (std::size_t s = 0; s < preds.size(); ++s)
    for (int j = 0; j < preds[s].joints(); ++j) {
      if (mask.states[s][j] != JointState::kReusable) continue;
      out.value += joint_mse(preds[s], relabel_targets[s], j) * coef;
      add_mse_grad(out.grad[s], preds[s], relabel_targets[s], j, coef);
    }
  return out;
}

BatchLoss consistency_loss(std::span<const HeatmapStack> student_preds,
                           std::span<const HeatmapStack> aligned_teacher) {
  if (student_preds.size() != aligned_teacher.size())
    throw std::invalid_argument("consistency_loss: batch size mismatch");
  BatchLoss out{0.0, zero_grads(student_preds)};
  if (student_preds.empty()) return out;
  const double n = static_cast<double>(student_preds.size());
  for (std::size_t s = 0; s < student_preds.size(); ++s) {
    const int joints = student_preds[s].joints();
    const double coef = 1.0 / (n * joints);
    for (int j = 0; j < joints; ++j) {
      out.value += joint_mse(student_preds[s], aligned_teacher[s], j) * coef;
      add_mse_grad(out.grad[s], student_preds[s], aligned_teacher[s], j, coef);
    }
  }
  return out;
}

double consistency_loss(const HeatmapStack& student_pred, const HeatmapStack& teacher_pred,
                        const AffineTransform& p_g) {
  require_same_shape(student_pred, teacher_pred);
  const HeatmapStack aligned = warp_heatmaps(p_g, teacher_pred);
  double acc = 0.0;
  for (int j = 0; j < student_pred.joints(); ++j) acc += joint_mse(aligned, student_pred, j);
  return acc / student_pred.joints();
}

double total_loss(double ls, double lp, double lr, double lt, const LossWeights& w) {
  return w.lambda1 * ls + w.lambda2 * lp + w.lambda3 * lr + w.lambda4 * lt;
}

}  // namespace scarcenet
