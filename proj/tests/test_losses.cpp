#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "scarcenet/losses.hpp"
#include "scarcenet/rng.hpp"

using namespace scarcenet;

namespace {

// Channel j of `pred` differs from the zero target by a constant whose square is mse[j].
HeatmapStack with_joint_mse(const std::vector<double>& mse, int side = 4) {
  HeatmapStack h(static_cast<int>(mse.size()), side, side);
  for (int j = 0; j < h.joints(); ++j)
    for (auto& v : h.channel(j)) v = static_cast<float>(std::sqrt(mse[j]));
  return h;
}

double nearest_rank(std::vector<double> v, int c) {
  std::sort(v.begin(), v.end());
  std::size_t rank = (static_cast<std::size_t>(c) * v.size() + 99) / 100;
  if (rank == 0) rank = 1;
  return v[rank - 1];
}

}  // namespace

TEST_CASE("supervised_loss examples") {
  const auto gt = with_joint_mse({0.0, 0.0});
  const auto pred = with_joint_mse({0.5, 0.1});
  CHECK(supervised_loss(gt, gt, {true, true}) == 0.0);
  CHECK(supervised_loss(pred, gt, {false, false}) == 0.0);
  CHECK(supervised_loss(pred, gt, {true, true}) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(supervised_loss(pred, gt, {true, false}) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK_THROWS_AS(supervised_loss(pred, with_joint_mse({0.0}), {true}), std::invalid_argument);
}

TEST_CASE("percentile_threshold examples") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(percentile_threshold(a, 100) == 4);
  CHECK(percentile_threshold(a, 50) == 2);
  CHECK(percentile_threshold(std::vector<double>{4.0, 0.25, 1.44, 0.09}, 50) == 0.25);
  CHECK(percentile_threshold(std::vector<double>{7.0}, 1) == 7.0);
  CHECK_THROWS_AS(percentile_threshold(std::vector<double>{}, 50), std::invalid_argument);
  CHECK_THROWS_AS(percentile_threshold(a, 0), std::invalid_argument);
  CHECK_THROWS_AS(percentile_threshold(a, 101), std::invalid_argument);
}

TEST_CASE("percentile_threshold matches a sort-based oracle") {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + rng.below(60));
    for (auto& x : v) x = rng.bernoulli(0.2) ? std::round(rng.uniform(0, 5)) : rng.uniform(0, 5);
    const int c = 1 + static_cast<int>(rng.below(100));
    CHECK(percentile_threshold(v, c) == nearest_rank(v, c));
  }
}

TEST_CASE("reliable_pseudo_loss selects strictly below the percentile") {
  const std::vector<HeatmapStack> preds{with_joint_mse({0.09, 0.25, 1.44, 4.0})};
  const std::vector<HeatmapStack> targets{with_joint_mse({0, 0, 0, 0})};
  const auto sel = reliable_pseudo_loss(preds, targets, {{true, true, true, true}}, 50);
  CHECK(sel.threshold == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(sel.loss.value == doctest::Approx(0.09).epsilon(1e-6));
  CHECK(sel.mask.count(JointState::kReliable) == 1);
  CHECK(sel.mask.states[0][0] == JointState::kReliable);

  const std::vector<HeatmapStack> same{with_joint_mse({0.3, 0.3, 0.3})};
  const std::vector<HeatmapStack> zero{with_joint_mse({0, 0, 0})};
  for (const double c : {10.0, 70.0, 100.0}) {
    const auto s = reliable_pseudo_loss(same, zero, {{true, true, true}}, c);
    CHECK(s.loss.value == 0.0);
    CHECK(s.mask.count(JointState::kReliable) == 0);
    for (const float g : s.loss.grad[0].values()) CHECK(g == 0.0f);
  }

  const auto exact = reliable_pseudo_loss(zero, zero, {{true, true, true}}, 70);
  CHECK(exact.threshold == 0.0);
  CHECK(exact.loss.value == 0.0);
}

TEST_CASE("reliable_pseudo_loss ignores invalid joints and pools over the batch") {
  const std::vector<HeatmapStack> preds{with_joint_mse({0.01, 9.0}), with_joint_mse({0.04, 0.5})};
  const std::vector<HeatmapStack> targets{with_joint_mse({0, 0}), with_joint_mse({0, 0})};
  const auto sel = reliable_pseudo_loss(preds, targets, {{true, false}, {true, true}}, 70);
  CHECK(sel.joint_losses.size() == 3);
  CHECK(sel.threshold == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(sel.mask.states[0][1] == JointState::kUnused);
  CHECK(sel.mask.count(JointState::kReliable) == 2);
  CHECK(sel.loss.value == doctest::Approx(0.025).epsilon(1e-5));
}

TEST_CASE("reusable_loss examples") {
  const std::vector<HeatmapStack> preds{with_joint_mse({0.2, 0.6, 5.0})};
  const std::vector<HeatmapStack> targets{with_joint_mse({0, 0, 0})};
  SelectionMask none(1, 3);
  CHECK(reusable_loss(preds, targets, none).value == 0.0);

  SelectionMask two(1, 3);
  two.states[0][0] = JointState::kReusable;
  two.states[0][1] = JointState::kReusable;
  two.states[0][2] = JointState::kReliable;
  CHECK(reusable_loss(preds, targets, two).value == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(reusable_loss(targets, targets, two).value == 0.0);
}

TEST_CASE("consistency_loss examples") {
  HeatmapStack student(1, 16, 16);
  for (auto& v : student.values()) v = 0.3f;
  CHECK(consistency_loss(student, student, AffineTransform::identity()) == 0.0);
  const HeatmapStack zero(1, 16, 16);
  CHECK(consistency_loss(zero, zero, make_affine(15, 1.1, true, {31.5, 31.5}, {}, 64)) == 0.0);

  HeatmapStack teacher = student;
  for (auto& v : teacher.values()) v += 0.1f;
  CHECK(consistency_loss(student, teacher, AffineTransform::identity()) == doctest::Approx(0.01).epsilon(1e-5));
  const std::vector<HeatmapStack> s{student}, t{teacher};
  CHECK(consistency_loss(s, t).value == doctest::Approx(0.01).epsilon(1e-5));
  CHECK_THROWS_AS(consistency_loss(student, HeatmapStack(2, 16, 16), AffineTransform::identity()),
                  std::invalid_argument);
}

TEST_CASE("single-sample consistency aligns the teacher before comparing") {
  Rng rng(4);
  HeatmapStack student(2, 16, 16), teacher(2, 16, 16);
  for (auto& v : student.values()) v = static_cast<float>(rng.uniform());
  for (auto& v : teacher.values()) v = static_cast<float>(rng.uniform());
  const auto pg = make_affine(12.0, 0.95, true, {31.5, 31.5}, {{0, 1}}, 64.0);
  const std::vector<HeatmapStack> s{student}, aligned{warp_heatmaps(pg, teacher)};
  CHECK(consistency_loss(student, teacher, pg) == doctest::Approx(consistency_loss(s, aligned).value).epsilon(1e-9));
}

TEST_CASE("total_loss examples") {
  const LossWeights w;
  CHECK(total_loss(1, 1, 1, 1, w) == 6.0);
  CHECK(total_loss(0, 0, 0, 0, w) == 0.0);
  const LossWeights sup{2, 0, 0, 0};
  CHECK(total_loss(0.7, 3, 4, 5, sup) == doctest::Approx(1.4));
}

TEST_CASE("finite differences: batch losses and their weighted sum") {
  Rng rng(31);
  gradcheck::Report r;
  for (int i = 0; i < 5; ++i) {
    gradcheck::supervised_instance(rng, r);
    gradcheck::pseudo_instance(rng, r);
    gradcheck::reusable_instance(rng, r);
    gradcheck::consistency_instance(rng, r);
    gradcheck::total_instance(rng, r);
  }
  CHECK(r.checks > 150);
  CHECK(r.worst <= gradcheck::kTolerance);
}
