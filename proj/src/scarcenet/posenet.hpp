#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scarcenet/heatmap.hpp"
#include "scarcenet/image.hpp"

namespace scarcenet {

enum class HeadType {
  kMultiBranch,  // per-joint 3x3 conv + ReLU + 1x1 conv
  kShared,       // one shared 1x1 conv producing all joints
};

struct ModelSpec {
  int joints = 8;
  HeadType head = HeadType::kMultiBranch;

  bool operator==(const ModelSpec&) const = default;
};

template <typename T>
struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;

  std::size_t size() const { return values.size(); }
};

/// Named parameter tensors of the heatmap network. The same type holds
/// gradients and optimizer moments.
template <typename T>
class BasicModel {
 public:
  BasicModel() = default;

  /// Zero-filled tensors with the layout implied by `spec`.
  static BasicModel zeros(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  std::vector<NamedTensor<T>>& tensors() { return tensors_; }
  const std::vector<NamedTensor<T>>& tensors() const { return tensors_; }

  NamedTensor<T>& get(const std::string& name);
  const NamedTensor<T>& get(const std::string& name) const;
  bool has(const std::string& name) const;

  std::size_t parameter_count() const;
  bool same_layout(const BasicModel& other) const;

  template <typename U>
  BasicModel<U> cast() const {
    BasicModel<U> out = BasicModel<U>::zeros(spec_);
    for (std::size_t i = 0; i < tensors_.size(); ++i)
      for (std::size_t k = 0; k < tensors_[i].size(); ++k)
        out.tensors()[i].values[k] = static_cast<U>(tensors_[i].values[k]);
    return out;
  }

  bool operator==(const BasicModel& o) const;

 private:
  ModelSpec spec_;
  std::vector<NamedTensor<T>> tensors_;
};

using ModelParams = BasicModel<float>;
using Gradients = BasicModel<float>;

/// He fan-in initialisation for ReLU layers, small normal init for the
/// linear output layers, zero biases.
ModelParams init_model(const ModelSpec& spec, std::uint64_t seed);

/// Activations of one sample, kept for the backward pass.
template <typename T>
struct SampleCache {
  int height = 0;
  int width = 0;
  std::vector<T> input;
  std::vector<T> a1, a2, a3, a4;  // trunk activations (post-ReLU)
  std::vector<T> branch;          // stacked branch features (post-ReLU); multi-branch only
  std::vector<T> output;          // J x H/4 x W/4
};

/// `image` is C x H x W with C = 3 and H, W divisible by 4.
template <typename T>
SampleCache<T> forward_sample(const BasicModel<T>& model, std::span<const T> image, int height,
                              int width);

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
template <typename T>
void backward_sample(const BasicModel<T>& model, const SampleCache<T>& cache,
                     std::span<const T> d_output, BasicModel<T>& grads);

/// Inference forward; samples are processed independently.
std::vector<HeatmapStack> forward(const ModelParams& model, std::span<const ImageTensor> batch);
HeatmapStack forward(const ModelParams& model, const ImageTensor& image);

struct TrainPass {
  std::vector<SampleCache<float>> caches;
  std::vector<HeatmapStack> outputs;
};

TrainPass forward_for_training(const ModelParams& model, std::span<const ImageTensor> batch);

/// Gradients summed over samples in index order. Entries of `d_outputs`
/// that are empty stacks contribute nothing.
Gradients backward(const ModelParams& model, const TrainPass& pass,
                   std::span<const HeatmapStack> d_outputs);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  Gradients first_moment;
  Gradients second_moment;
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  AdamSettings adam;
};

OptimizerState make_optimizer(const ModelParams& params, double learning_rate);

/// One Adam update at state.learning_rate. Throws NumericError naming the
/// first tensor with a non-finite gradient; parameters are untouched then.
void optimizer_step(ModelParams& params, const Gradients& grads, OptimizerState& state);

/// teacher <- alpha * teacher + (1 - alpha) * student, tensor by tensor.
template <typename T>
void ema_update(BasicModel<T>& teacher, const BasicModel<T>& student, double alpha);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
/// Infers the architecture from tensor names and validates every shape.
ModelParams load_checkpoint(const std::filesystem::path& path);
/// Same, and additionally requires the stored architecture to equal `expected`.
ModelParams load_checkpoint(const std::filesystem::path& path, const ModelSpec& expected);

}  // namespace scarcenet
