#include "scarcenet/posenet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "scarcenet/errors.hpp"
#include "scarcenet/layers.hpp"
#include "scarcenet/parallel.hpp"
#include "scarcenet/rng.hpp"

namespace scarcenet {
namespace {

constexpr int kBranchWidth = 16;

struct ConvLayer {
  const char* name;
  int in;
  int out;
  int stride;
};

constexpr ConvLayer kTrunk[] = {
    {"trunk.conv1", 3, 16, 1},
    {"trunk.conv2", 16, 32, 2},
    {"trunk.conv3", 32, 32, 1},
    {"trunk.conv4", 32, 64, 2},
};
constexpr int kTrunkOut = 64;

std::string branch_name(int j, const char* leaf) {
  return "branch" + std::to_string(j) + "." + leaf;
}

std::vector<std::pair<std::string, std::vector<int>>> layout(const ModelSpec& spec) {
  if (spec.joints < 1) throw std::invalid_argument("model needs at least one joint");
  std::vector<std::pair<std::string, std::vector<int>>> out;
  for (const auto& l : kTrunk) {
    out.push_back({std::string(l.name) + ".weight", {l.out, l.in, 3, 3}});
    out.push_back({std::string(l.name) + ".bias", {l.out}});
  }
  if (spec.head == HeadType::kShared) {
    out.push_back({"head.out.weight", {spec.joints, kTrunkOut, 1, 1}});
    out.push_back({"head.out.bias", {spec.joints}});
  } else {
    for (int j = 0; j < spec.joints; ++j) {
      out.push_back({branch_name(j, "conv.weight"), {kBranchWidth, kTrunkOut, 3, 3}});
      out.push_back({branch_name(j, "conv.bias"), {kBranchWidth}});
      out.push_back({branch_name(j, "out.weight"), {1, kBranchWidth, 1, 1}});
      out.push_back({branch_name(j, "out.bias"), {1}});
    }
  }
  return out;
}

template <typename T>
std::vector<T> stacked_branch_weights(const BasicModel<T>& m) {
  const int j_count = m.spec().joints;
  const std::size_t per = static_cast<std::size_t>(kBranchWidth) * kTrunkOut * 9;
  std::vector<T> w(per * j_count);
  for (int j = 0; j < j_count; ++j) {
    const auto& src = m.get(branch_name(j, "conv.weight")).values;
    std::copy(src.begin(), src.end(), w.begin() + static_cast<std::ptrdiff_t>(per * j));
  }
  return w;
}

template <typename T>
std::vector<T> stacked_branch_bias(const BasicModel<T>& m) {
  std::vector<T> b;
  for (int j = 0; j < m.spec().joints; ++j) {
    const auto& src = m.get(branch_name(j, "conv.bias")).values;
    b.insert(b.end(), src.begin(), src.end());
  }
  return b;
}

void write_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint truncated");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

constexpr char kMagic[4] = {'S', 'C', 'N', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

template <typename T>
BasicModel<T> BasicModel<T>::zeros(const ModelSpec& spec) {
  BasicModel<T> m;
  m.spec_ = spec;
  for (auto& [name, shape] : layout(spec)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    m.tensors_.push_back({name, shape, std::vector<T>(n, T(0))});
  }
  return m;
}

template <typename T>
NamedTensor<T>& BasicModel<T>::get(const std::string& name) {
  for (auto& t : tensors_)
    if (t.name == name) return t;
  throw std::out_of_range("no tensor named " + name);
}

template <typename T>
const NamedTensor<T>& BasicModel<T>::get(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw std::out_of_range("no tensor named " + name);
}

template <typename T>
bool BasicModel<T>::has(const std::string& name) const {
  return std::any_of(tensors_.begin(), tensors_.end(), [&](const auto& t) { return t.name == name; });
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template <typename T>
bool BasicModel<T>::same_layout(const BasicModel& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name != other.tensors_[i].name || tensors_[i].shape != other.tensors_[i].shape)
      return false;
  return true;
}

template <typename T>
bool BasicModel<T>::operator==(const BasicModel& o) const {
  if (!(spec_ == o.spec_) || !same_layout(o)) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].values != o.tensors_[i].values) return false;
  return true;
}

template class BasicModel<float>;
template class BasicModel<double>;

ModelParams init_model(const ModelSpec& spec, std::uint64_t seed) {
  ModelParams m = ModelParams::zeros(spec);
  Rng rng(stream_seed(seed, 0x1417ULL));
  for (auto& t : m.tensors()) {
    if (t.shape.size() != 4) continue;  // biases stay zero
    const int fan_in = t.shape[1] * t.shape[2] * t.shape[3];
    const bool linear_out = t.shape[2] == 1;
    const double stddev = linear_out ? 0.05 / std::sqrt(fan_in) : std::sqrt(2.0 / fan_in);
    for (auto& v : t.values) v = static_cast<float>(stddev * rng.normal());
  }
  return m;
}

template <typename T>
SampleCache<T> forward_sample(const BasicModel<T>& model, std::span<const T> image, int height,
                              int width) {
  if (height % 4 != 0 || width % 4 != 0 || height <= 0 || width <= 0)
    throw std::invalid_argument("forward: input size must be a positive multiple of 4");
  if (image.size() != static_cast<std::size_t>(3) * height * width)
    throw std::invalid_argument("forward: expected a 3-channel image");
  SampleCache<T> c;
  c.height = height;
  c.width = width;
  c.input.assign(image.begin(), image.end());

  std::span<const T> x = c.input;
  int h = height, w = width;
  std::vector<T>* acts[] = {&c.a1, &c.a2, &c.a3, &c.a4};
  for (int i = 0; i < 4; ++i) {
    const auto& l = kTrunk[i];
    const std::string base(l.name);
    *acts[i] = layers::conv3x3<T>(x, l.in, h, w, l.stride, model.get(base + ".weight").values,
                                  model.get(base + ".bias").values, l.out);
    layers::relu<T>(*acts[i]);
    h = (h - 1) / l.stride + 1;
    w = (w - 1) / l.stride + 1;
    x = *acts[i];
  }

  const int joints = model.spec().joints;
  const int hw = h * w;
  if (model.spec().head == HeadType::kShared) {
    c.output = layers::conv1x1<T>(c.a4, kTrunkOut, hw, model.get("head.out.weight").values,
                                  model.get("head.out.bias").values, joints);
    return c;
  }

  const auto w_stack = stacked_branch_weights(model);
  const auto b_stack = stacked_branch_bias(model);
  c.branch = layers::conv3x3<T>(c.a4, kTrunkOut, h, w, 1, w_stack, b_stack, kBranchWidth * joints);
  layers::relu<T>(c.branch);
  c.output.reserve(static_cast<std::size_t>(joints) * hw);
  for (int j = 0; j < joints; ++j) {
    const std::span<const T> feat(c.branch.data() + static_cast<std::size_t>(j) * kBranchWidth * hw,
                                  static_cast<std::size_t>(kBranchWidth) * hw);
    const auto out = layers::conv1x1<T>(feat, kBranchWidth, hw, model.get(branch_name(j, "out.weight")).values,
                                        model.get(branch_name(j, "out.bias")).values, 1);
    c.output.insert(c.output.end(), out.begin(), out.end());
  }
  return c;
}

template <typename T>
void backward_sample(const BasicModel<T>& model, const SampleCache<T>& c,
                     std::span<const T> d_output, BasicModel<T>& grads) {
  if (d_output.size() != c.output.size())
    throw std::invalid_argument("backward: output gradient has the wrong size");
  const int joints = model.spec().joints;
  const int h4 = c.height / 4, w4 = c.width / 4, hw = h4 * w4;

  std::vector<T> dy;
  if (model.spec().head == HeadType::kShared) {
    dy = layers::conv1x1_backward<T>(c.a4, kTrunkOut, hw, model.get("head.out.weight").values, joints,
                                     d_output, grads.get("head.out.weight").values,
                                     grads.get("head.out.bias").values);
  } else {
    const int stacked = kBranchWidth * joints;
    const std::size_t slice = static_cast<std::size_t>(kBranchWidth) * hw;
    std::vector<T> d_branch;
    d_branch.reserve(static_cast<std::size_t>(stacked) * hw);
    for (int j = 0; j < joints; ++j) {
      const std::span<const T> feat(c.branch.data() + j * slice, slice);
      const auto d_feat = layers::conv1x1_backward<T>(
          feat, kBranchWidth, hw, model.get(branch_name(j, "out.weight")).values, 1,
          d_output.subspan(static_cast<std::size_t>(j) * hw, hw),
          grads.get(branch_name(j, "out.weight")).values, grads.get(branch_name(j, "out.bias")).values);
      d_branch.insert(d_branch.end(), d_feat.begin(), d_feat.end());
    }
    layers::relu_backward<T>(c.branch, d_branch);

    const auto w_stack = stacked_branch_weights(model);
    std::vector<T> gw_stack(w_stack.size(), T(0));
    std::vector<T> gb_stack(static_cast<std::size_t>(stacked), T(0));
    dy = layers::conv3x3_backward<T>(c.a4, kTrunkOut, h4, w4, 1, w_stack, stacked, d_branch, gw_stack,
                                     gb_stack);
    const std::size_t per = static_cast<std::size_t>(kBranchWidth) * kTrunkOut * 9;
    for (int j = 0; j < joints; ++j) {
      auto& gw = grads.get(branch_name(j, "conv.weight")).values;
      for (std::size_t k = 0; k < per; ++k) gw[k] += gw_stack[per * j + k];
      auto& gb = grads.get(branch_name(j, "conv.bias")).values;
      for (int k = 0; k < kBranchWidth; ++k) gb[k] += gb_stack[static_cast<std::size_t>(j) * kBranchWidth + k];
    }
  }

  const std::vector<T>* inputs[] = {&c.input, &c.a1, &c.a2, &c.a3};
  const std::vector<T>* outputs[] = {&c.a1, &c.a2, &c.a3, &c.a4};
  int dims[5][2];
  dims[0][0] = c.height, dims[0][1] = c.width;
  for (int i = 0; i < 4; ++i) {
    dims[i + 1][0] = (dims[i][0] - 1) / kTrunk[i].stride + 1;
    dims[i + 1][1] = (dims[i][1] - 1) / kTrunk[i].stride + 1;
  }
  for (int i = 3; i >= 0; --i) {
    const auto& l = kTrunk[i];
    const std::string base(l.name);
    layers::relu_backward<T>(*outputs[i], dy);
    dy = layers::conv3x3_backward<T>(*inputs[i], l.in, dims[i][0], dims[i][1], l.stride,
                                     model.get(base + ".weight").values, l.out, dy,
                                     grads.get(base + ".weight").values,
                                     grads.get(base + ".bias").values, i > 0);
  }
}

template SampleCache<float> forward_sample(const BasicModel<float>&, std::span<const float>, int, int);
template SampleCache<double> forward_sample(const BasicModel<double>&, std::span<const double>, int, int);
template void backward_sample(const BasicModel<float>&, const SampleCache<float>&,
                              std::span<const float>, BasicModel<float>&);
template void backward_sample(const BasicModel<double>&, const SampleCache<double>&,
                              std::span<const double>, BasicModel<double>&);

namespace {

HeatmapStack to_stack(const SampleCache<float>& c, int joints) {
  HeatmapStack h(joints, c.height / 4, c.width / 4, 4);
  std::copy(c.output.begin(), c.output.end(), h.values().begin());
  return h;
}

void check_channels(const ImageTensor& img) {
  if (img.channels() != 3) throw std::invalid_argument("forward: expected a 3-channel image");
}

}  // namespace

HeatmapStack forward(const ModelParams& model, const ImageTensor& image) {
  check_channels(image);
  const auto c = forward_sample<float>(model, image.values(), image.height(), image.width());
  return to_stack(c, model.spec().joints);
}

std::vector<HeatmapStack> forward(const ModelParams& model, std::span<const ImageTensor> batch) {
  std::vector<HeatmapStack> out(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) { out[i] = forward(model, batch[i]); });
  return out;
}

TrainPass forward_for_training(const ModelParams& model, std::span<const ImageTensor> batch) {
  for (const auto& img : batch) check_channels(img);
  TrainPass pass;
  pass.caches.resize(batch.size());
  pass.outputs.resize(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    pass.caches[i] = forward_sample<float>(model, batch[i].values(), batch[i].height(), batch[i].width());
    pass.outputs[i] = to_stack(pass.caches[i], model.spec().joints);
  });
  return pass;
}

Gradients backward(const ModelParams& model, const TrainPass& pass,
                   std::span<const HeatmapStack> d_outputs) {
  if (d_outputs.size() != pass.caches.size())
    throw std::invalid_argument("backward: one output gradient per sample required");
  std::vector<Gradients> per_sample(pass.caches.size());
  parallel_for(pass.caches.size(), [&](std::size_t i) {
    if (d_outputs[i].values().empty()) return;
    per_sample[i] = Gradients::zeros(model.spec());
    backward_sample<float>(model, pass.caches[i], d_outputs[i].values(), per_sample[i]);
  });
  Gradients g = Gradients::zeros(model.spec());
  for (const auto& ps : per_sample) {
    if (ps.tensors().empty()) continue;
    for (std::size_t t = 0; t < g.tensors().size(); ++t) {
      auto& dst = g.tensors()[t].values;
      const auto& src = ps.tensors()[t].values;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  return g;
}

OptimizerState make_optimizer(const ModelParams& params, double learning_rate) {
  return {Gradients::zeros(params.spec()), Gradients::zeros(params.spec()), 0, learning_rate, {}};
}

void optimizer_step(ModelParams& params, const Gradients& grads, OptimizerState& s) {
  if (!params.same_layout(grads) || !params.same_layout(s.first_moment))
    throw std::invalid_argument("optimizer_step: shape mismatch");
  for (const auto& t : grads.tensors())
    for (float v : t.values)
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + t.name);

  ++s.step;
  const double b1 = s.adam.beta1, b2 = s.adam.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    auto& p = params.tensors()[i].values;
    const auto& g = grads.tensors()[i].values;
    auto& m = s.first_moment.tensors()[i].values;
    auto& v = s.second_moment.tensors()[i].values;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = b1 * m[k] + (1.0 - b1) * gk;
      const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double update = s.learning_rate * (mk / c1) / (std::sqrt(vk / c2) + s.adam.eps);
      p[k] = static_cast<float>(p[k] - update);
    }
  }
}

template <typename T>
void ema_update(BasicModel<T>& teacher, const BasicModel<T>& student, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("ema_update: alpha outside [0,1]");
  if (!teacher.same_layout(student)) throw std::invalid_argument("ema_update: shape mismatch");
  for (std::size_t i = 0; i < teacher.tensors().size(); ++i) {
    auto& t = teacher.tensors()[i].values;
    const auto& s = student.tensors()[i].values;
    if (alpha == 0.0) {
      t = s;
      continue;
    }
    if (alpha == 1.0) continue;
    for (std::size_t k = 0; k < t.size(); ++k)
      t[k] = static_cast<T>(alpha * static_cast<double>(t[k]) + (1.0 - alpha) * static_cast<double>(s[k]));
  }
}

template void ema_update(BasicModel<float>&, const BasicModel<float>&, double);
template void ema_update(BasicModel<double>&, const BasicModel<double>&, double);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path.string());
  os.write(kMagic, 4);
  write_u32(os, kFormatVersion);
  write_u32(os, static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& t : params.tensors()) {
    const auto len = static_cast<std::uint16_t>(t.name.size());
    const unsigned char lb[2] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8)};
    os.write(reinterpret_cast<const char*>(lb), 2);
    os.write(t.name.data(), len);
    const auto rank = static_cast<unsigned char>(t.shape.size());
    os.put(static_cast<char>(rank));
    for (int d : t.shape) write_u32(os, static_cast<std::uint32_t>(d));
    for (float v : t.values) write_u32(os, std::bit_cast<std::uint32_t>(v));
  }
  if (!os) throw DataError("checkpoint write failed: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad checkpoint magic in " + path.string());
  const auto version = read_u32(is);
  if (version != kFormatVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto count = read_u32(is);

  std::vector<NamedTensor<float>> stored;
  for (std::uint32_t i = 0; i < count; ++i) {
    unsigned char lb[2];
    if (!is.read(reinterpret_cast<char*>(lb), 2)) throw FormatError("checkpoint truncated");
    std::string name(std::size_t(lb[0]) | std::size_t(lb[1]) << 8, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size())))
      throw FormatError("checkpoint truncated");
    const int rank = is.get();
    if (rank == EOF) throw FormatError("checkpoint truncated");
    NamedTensor<float> t{name, {}, {}};
    std::size_t n = 1;
    for (int r = 0; r < rank; ++r) {
      t.shape.push_back(static_cast<int>(read_u32(is)));
      n *= static_cast<std::size_t>(t.shape.back());
    }
    if (n > (1u << 28)) throw FormatError("implausible tensor size in checkpoint");
    t.values.resize(n);
    for (auto& v : t.values) v = std::bit_cast<float>(read_u32(is));
    stored.push_back(std::move(t));
  }

  ModelSpec spec;
  const auto has = [&](const std::string& n) {
    return std::any_of(stored.begin(), stored.end(), [&](const auto& t) { return t.name == n; });
  };
  if (has("head.out.weight")) {
    spec.head = HeadType::kShared;
    for (const auto& t : stored)
      if (t.name == "head.out.weight" && !t.shape.empty()) spec.joints = t.shape[0];
  } else {
    spec.head = HeadType::kMultiBranch;
    spec.joints = 0;
    while (has(branch_name(spec.joints, "conv.weight"))) ++spec.joints;
  }
  if (spec.joints < 1) throw FormatError("checkpoint has no prediction head");

  ModelParams m = ModelParams::zeros(spec);
  if (stored.size() != m.tensors().size())
    throw FormatError("checkpoint tensor count does not match the architecture");
  for (auto& t : m.tensors()) {
    auto it = std::find_if(stored.begin(), stored.end(), [&](const auto& s) { return s.name == t.name; });
    if (it == stored.end()) throw FormatError("checkpoint lacks tensor " + t.name);
    if (it->shape != t.shape) throw FormatError("shape mismatch for tensor " + t.name);
    t.values = std::move(it->values);
  }
  return m;
}

ModelParams load_checkpoint(const std::filesystem::path& path, const ModelSpec& expected) {
  ModelParams m = load_checkpoint(path);
  if (!(m.spec() == expected)) throw FormatError("checkpoint architecture differs from the expected one");
  return m;
}

}  // namespace scarcenet
