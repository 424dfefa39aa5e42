#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "gradcheck.hpp"
#include "scarcenet/errors.hpp"
#include "scarcenet/layers.hpp"
#include "scarcenet/parallel.hpp"
#include "scarcenet/posenet.hpp"
#include "scarcenet/rng.hpp"

using namespace scarcenet;
namespace fs = std::filesystem;

namespace {

ImageTensor random_image(Rng& rng, int side = 64) {
  ImageTensor img(3, side, side);
  for (auto& v : img.values()) v = static_cast<float>(rng.uniform());
  return img;
}

bool all_zero(const NamedTensor<float>& t) {
  for (const float v : t.values)
    if (v != 0.0f) return false;
  return true;
}

fs::path scratch_file(const std::string& name) { return fs::temp_directory_path() / ("scarcenet_posenet_" + name); }

}  // namespace

TEST_CASE("init_model is seeded and has one head per joint") {
  const ModelSpec spec{8, HeadType::kMultiBranch};
  const auto a = init_model(spec, 3);
  CHECK(a == init_model(spec, 3));
  CHECK_FALSE(a == init_model(spec, 4));
  for (int j = 0; j < 8; ++j) CHECK(a.has("branch" + std::to_string(j) + ".out.weight"));
  CHECK_FALSE(a.has("branch8.out.weight"));
  Rng rng(1);
  const auto out = forward(a, random_image(rng));
  CHECK(out.joints() == 8);
  CHECK(out.height() == 16);
  CHECK(out.width() == 16);

  const auto shared = init_model({5, HeadType::kShared}, 3);
  CHECK(shared.has("head.out.weight"));
  CHECK(forward(shared, random_image(rng)).joints() == 5);
  CHECK(shared.parameter_count() < a.parameter_count());
}

TEST_CASE("zero image through a zero-bias model gives zero heatmaps") {
  const auto m = init_model({8, HeadType::kMultiBranch}, 1);
  const auto out = forward(m, ImageTensor(3, 64, 64, 0.0f));
  for (const float v : out.values()) CHECK(v == 0.0f);
}

TEST_CASE("batch forward matches single-sample forward") {
  Rng rng(2);
  const auto m = init_model({8, HeadType::kMultiBranch}, 2);
  std::vector<ImageTensor> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(random_image(rng));
  const auto outs = forward(m, batch);
  REQUIRE(outs.size() == 8);
  const auto single = forward(m, batch[5]);
  for (std::size_t i = 0; i < single.values().size(); ++i)
    CHECK(std::abs(single.values()[i] - outs[5].values()[i]) <= 1e-6f);
}

TEST_CASE("doubling a final kernel doubles only that joint") {
  Rng rng(3);
  auto m = init_model({4, HeadType::kMultiBranch}, 5);
  const auto img = random_image(rng);
  const auto before = forward(m, img);
  for (auto& v : m.get("branch2.out.weight").values) v *= 2.0f;
  const auto after = forward(m, img);
  for (int j = 0; j < 4; ++j)
    for (std::size_t i = 0; i < before.plane_size(); ++i) {
      const float want = j == 2 ? 2.0f * before.channel(j)[i] : before.channel(j)[i];
      CHECK(std::abs(after.channel(j)[i] - want) <= 1e-6f);
    }
}

TEST_CASE("forward rejects bad shapes") {
  const auto m = init_model({2, HeadType::kMultiBranch}, 1);
  CHECK_THROWS_AS(forward(m, ImageTensor(3, 30, 30)), std::invalid_argument);
  CHECK_THROWS_AS(forward(m, ImageTensor(1, 32, 32)), std::invalid_argument);
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  Rng rng(4);
  const auto m = init_model({3, HeadType::kMultiBranch}, 1);
  const std::vector<ImageTensor> batch{random_image(rng, 32), random_image(rng, 32)};
  const auto pass = forward_for_training(m, batch);
  std::vector<HeatmapStack> d(2, HeatmapStack(3, 8, 8));
  const auto g = backward(m, pass, d);
  for (const auto& t : g.tensors()) CHECK(all_zero(t));
  const auto g_empty = backward(m, pass, std::vector<HeatmapStack>(2));
  for (const auto& t : g_empty.tensors()) CHECK(all_zero(t));
}

TEST_CASE("a loss on one joint leaves every other branch untouched") {
  Rng rng(5);
  const int joints = 4;
  const auto m = init_model({joints, HeadType::kMultiBranch}, 7);
  const std::vector<ImageTensor> batch{random_image(rng, 32)};
  const auto pass = forward_for_training(m, batch);
  for (int i = 0; i < joints; ++i) {
    HeatmapStack d(joints, 8, 8);
    for (auto& v : d.channel(i)) v = static_cast<float>(rng.normal());
    const auto g = backward(m, pass, std::vector<HeatmapStack>{d});
    for (const auto& t : g.tensors()) {
      if (!t.name.starts_with("branch")) continue;
      const bool own = t.name.starts_with("branch" + std::to_string(i) + ".");
      if (own)
        CHECK_FALSE(all_zero(t));
      else
        CHECK(all_zero(t));
    }
  }
}

TEST_CASE("finite differences: layer primitives") {
  Rng rng(11);
  gradcheck::Report r;
  for (int i = 0; i < 5; ++i) {
    gradcheck::conv3x3_instance(rng, r);
    gradcheck::conv1x1_instance(rng, r);
    gradcheck::relu_instance(rng, r);
    gradcheck::mse_instance(rng, r);
    gradcheck::micronet_instance(rng, r);
  }
  CHECK(r.checks > 100);
  CHECK(r.worst <= gradcheck::kTolerance);
}

TEST_CASE("finite differences: whole network") {
  Rng rng(12);
  gradcheck::Report r;
  for (int i = 0; i < 3; ++i) {
    gradcheck::posenet_instance(rng, r, HeadType::kMultiBranch);
    gradcheck::posenet_instance(rng, r, HeadType::kShared);
  }
  CHECK(r.checks > 20);
  CHECK(r.worst <= gradcheck::kTolerance);
}

TEST_CASE("conv results do not depend on buffer alignment") {
  Rng rng(13);
  const int in_c = 5, out_c = 7, h = 9, w = 11;
  const auto x0 = gradcheck::normals(rng, in_c * h * w);
  const auto w0 = gradcheck::normals(rng, out_c * in_c * 9);
  const auto b0 = gradcheck::normals(rng, out_c);
  const auto dy0 = gradcheck::normals(rng, out_c * h * w);

  struct Result {
    std::vector<float> y, dx, dw, db;
  };
  const auto run = [&](std::size_t offset) {
    std::vector<float> xb(x0.size() + 8), wb(w0.size() + 8), bb(b0.size() + 8), dyb(dy0.size() + 8);
    std::copy(x0.begin(), x0.end(), xb.begin() + offset);
    std::copy(w0.begin(), w0.end(), wb.begin() + offset);
    std::copy(b0.begin(), b0.end(), bb.begin() + offset);
    std::copy(dy0.begin(), dy0.end(), dyb.begin() + offset);
    const std::span<const float> x(xb.data() + offset, x0.size()), wt(wb.data() + offset, w0.size()),
        b(bb.data() + offset, b0.size()), dy(dyb.data() + offset, dy0.size());
    Result r;
    r.y = layers::conv3x3<float>(x, in_c, h, w, 1, wt, b, out_c);
    std::vector<float> gw(w0.size() + 8), gb(b0.size() + 8);
    r.dx = layers::conv3x3_backward<float>(x, in_c, h, w, 1, wt, out_c, dy, std::span(gw.data() + offset, w0.size()),
                                           std::span(gb.data() + offset, b0.size()));
    r.dw.assign(gw.begin() + offset, gw.begin() + offset + w0.size());
    r.db.assign(gb.begin() + offset, gb.begin() + offset + b0.size());
    return r;
  };
  const Result ref = run(0);
  for (std::size_t offset = 1; offset < 8; ++offset) {
    const Result r = run(offset);
    CHECK(r.y == ref.y);
    CHECK(r.dx == ref.dx);
    CHECK(r.dw == ref.dw);
    CHECK(r.db == ref.db);
  }
}

TEST_CASE("gradients do not depend on the worker count") {
  Rng rng(14);
  const auto m = init_model({3, HeadType::kMultiBranch}, 2);
  std::vector<ImageTensor> batch;
  std::vector<HeatmapStack> d;
  for (int i = 0; i < 5; ++i) {
    batch.push_back(random_image(rng, 32));
    HeatmapStack h(3, 8, 8);
    for (auto& v : h.values()) v = static_cast<float>(rng.normal());
    d.push_back(h);
  }
  set_num_threads(1);
  const auto g1 = backward(m, forward_for_training(m, batch), d);
  set_num_threads(4);
  const auto g4 = backward(m, forward_for_training(m, batch), d);
  set_num_threads(1);
  CHECK(g1 == g4);
}

TEST_CASE("adam: zero gradients and zero learning rate leave parameters alone") {
  auto p = init_model({2, HeadType::kMultiBranch}, 1);
  const auto before = p;
  auto state = make_optimizer(p, 1e-3);
  optimizer_step(p, Gradients::zeros(p.spec()), state);
  CHECK(p == before);

  Rng rng(6);
  auto g = Gradients::zeros(p.spec());
  for (auto& t : g.tensors())
    for (auto& v : t.values) v = static_cast<float>(rng.normal());
  auto frozen = make_optimizer(p, 0.0);
  optimizer_step(p, g, frozen);
  CHECK(p == before);
}

TEST_CASE("adam: first step moves every parameter by about the learning rate") {
  auto p = init_model({2, HeadType::kMultiBranch}, 1);
  const auto before = p;
  Rng rng(7);
  auto g = Gradients::zeros(p.spec());
  for (auto& t : g.tensors())
    for (auto& v : t.values) v = static_cast<float>(rng.uniform(0.1, 1.0) * (rng.bernoulli(0.5) ? 1 : -1));
  const double lr = 1e-3;
  auto state = make_optimizer(p, lr);
  optimizer_step(p, g, state);
  CHECK(state.step == 1);
  for (std::size_t t = 0; t < p.tensors().size(); ++t)
    for (std::size_t k = 0; k < p.tensors()[t].size(); ++k) {
      const double delta = static_cast<double>(p.tensors()[t].values[k]) - before.tensors()[t].values[k];
      const double sign = g.tensors()[t].values[k] > 0 ? -1.0 : 1.0;
      CHECK(delta * sign > 0.0);
      CHECK(std::abs(std::abs(delta) - lr) < 1e-6);
    }
}

TEST_CASE("adam: non-finite gradient aborts without touching parameters") {
  auto p = init_model({2, HeadType::kMultiBranch}, 1);
  const auto before = p;
  auto g = Gradients::zeros(p.spec());
  g.get("branch1.conv.weight").values[3] = std::numeric_limits<float>::quiet_NaN();
  auto state = make_optimizer(p, 1e-3);
  CHECK_THROWS_AS(optimizer_step(p, g, state), NumericError);
  CHECK(p == before);
}

TEST_CASE("ema_update closed forms") {
  const ModelSpec spec{1, HeadType::kShared};
  auto teacher = BasicModel<double>::zeros(spec);
  auto student = BasicModel<double>::zeros(spec);
  for (auto& t : teacher.tensors()) std::fill(t.values.begin(), t.values.end(), 1.0);

  auto t1 = teacher;
  ema_update(t1, student, 1.0);
  CHECK(t1 == teacher);
  auto t0 = teacher;
  ema_update(t0, student, 0.0);
  CHECK(t0 == student);

  auto t2 = teacher;
  ema_update(t2, student, 0.9);
  ema_update(t2, student, 0.9);
  for (const auto& t : t2.tensors())
    for (const double v : t.values) CHECK(v == doctest::Approx(0.81).epsilon(1e-12));

  const auto other = BasicModel<double>::zeros({2, HeadType::kShared});
  CHECK_THROWS_AS(ema_update(t2, other, 0.5), std::invalid_argument);
}

TEST_CASE("checkpoint roundtrip and validation") {
  const auto path = scratch_file("model.ckpt");
  const auto m = init_model({8, HeadType::kMultiBranch}, 9);
  save_checkpoint(path, m);
  CHECK(load_checkpoint(path) == m);
  CHECK(load_checkpoint(path, m.spec()) == m);
  CHECK_THROWS_AS(load_checkpoint(path, {8, HeadType::kShared}), FormatError);
  CHECK_THROWS_AS(load_checkpoint(path, {7, HeadType::kMultiBranch}), FormatError);

  const auto shared = init_model({8, HeadType::kShared}, 9);
  save_checkpoint(path, shared);
  CHECK(load_checkpoint(path).spec() == shared.spec());

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  save_checkpoint(path, m);
  fs::resize_file(path, fs::file_size(path) / 2);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
}
