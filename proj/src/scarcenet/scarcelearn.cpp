#include "scarcenet/scarcelearn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "scarcenet/augment.hpp"
#include "scarcenet/errors.hpp"
#include "scarcenet/metrics.hpp"
#include "scarcenet/parallel.hpp"
#include "scarcenet/rng.hpp"

namespace scarcenet {
namespace {

constexpr std::uint64_t kStage1Stream = 0x5343'4e31;
constexpr std::uint64_t kStage2Stream = 0x5343'4e32;
constexpr std::uint64_t kShuffleSalt = 1;
constexpr std::uint64_t kSlotSalt = 2;
constexpr std::uint64_t kAgreementSalt = 3;
constexpr std::uint64_t kLabeledDrawSalt = 4;

int heatmap_side(int image_side) { return image_side / kDefaultResolutionRatio; }

AugmentedSample augment(const TrainConfig& cfg, const ImageTensor& img, Rng& rng) {
  if (cfg.augmentation == AugmentMode::kWeak) return weak_augment(img, rng, cfg.augment);
  return strong_augment(img, rng, creature_skeleton().flip_pairs, cfg.augment);
}

HeatmapStack encode_in_frame(const Keypoints& kp, const TrainConfig& cfg, const ImageTensor& img) {
  return encode(kp, cfg.sigma, heatmap_side(img.width()), heatmap_side(img.height()));
}

// Student-frame joint j shows original joint perm[j].
std::vector<int> joint_permutation(const AffineTransform& geo, int joints) {
  std::vector<int> perm(static_cast<std::size_t>(joints));
  std::iota(perm.begin(), perm.end(), 0);
  if (geo.flip)
    for (const auto& [a, b] : geo.flip_pairs) std::swap(perm[a], perm[b]);
  return perm;
}

void accumulate(HeatmapStack& dst, const HeatmapStack& src, double weight) {
  auto d = dst.values();
  const auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += static_cast<float>(weight * s[i]);
}

HeatmapStack zeros_like(const HeatmapStack& h) {
  return HeatmapStack(h.joints(), h.height(), h.width(), h.resolution_ratio());
}

void say(const TrainHooks& hooks, const std::string& m) {
  if (hooks.message) hooks.message(m);
}

bool is_eval_epoch(const TrainConfig& cfg, int epoch, int epochs) {
  return (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == epochs;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

PseudoLabel make_pseudo_label(int sample_id, const HeatmapStack& output, double tau_conf) {
  const Decoded d = decode(output);
  PseudoLabel pl;
  pl.sample_id = sample_id;
  pl.coords = d.keypoints.coords;
  for (const float s : d.scores) {
    const double c = std::clamp(static_cast<double>(s), 0.0, 1.0);
    pl.confidence.push_back(c);
    pl.valid.push_back(c >= tau_conf);
  }
  return pl;
}

std::vector<PseudoLabel> generate_pseudo_labels(const ModelParams& model,
                                                std::span<const UnlabeledSample> samples,
                                                double tau_conf) {
  std::vector<ImageTensor> images;
  images.reserve(samples.size());
  for (const auto& s : samples) images.push_back(s.image);
  const auto outputs = forward(model, images);
  std::vector<PseudoLabel> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.push_back(make_pseudo_label(samples[i].sample_id, outputs[i], tau_conf));
  return out;
}

void write_pseudo_labels(const std::filesystem::path& path, std::span<const PseudoLabel> labels) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write pseudo labels to " + path.string());
  for (const auto& pl : labels) {
    nlohmann::ordered_json j;
    j["sample_id"] = pl.sample_id;
    auto joints = nlohmann::json::array();
    for (std::size_t k = 0; k < pl.coords.size(); ++k)
      joints.push_back({pl.coords[k].x, pl.coords[k].y, pl.confidence[k], pl.valid[k] ? 1 : 0});
    j["joints"] = std::move(joints);
    os << j.dump() << '\n';
  }
}

std::vector<PseudoLabel> read_pseudo_labels(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("pseudo-label cache not found: " + path.string());
  std::vector<PseudoLabel> out;
  std::set<int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PseudoLabel pl;
      pl.sample_id = j.at("sample_id").get<int>();
      for (const auto& jt : j.at("joints")) {
        if (jt.size() != 4) throw FormatError("joint entry needs 4 values");
        pl.coords.push_back({jt[0].get<double>(), jt[1].get<double>()});
        pl.confidence.push_back(jt[2].get<double>());
        pl.valid.push_back(jt[3].get<int>() != 0);
      }
      if (!seen.insert(pl.sample_id).second)
        throw FormatError("duplicate sample_id " + std::to_string(pl.sample_id));
      out.push_back(std::move(pl));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

AgreementResult agreement_from_outputs(const HeatmapStack& view1, const HeatmapStack& view2,
                                       const AffineTransform& t, double d_r) {
  if (!view1.same_shape(view2)) throw std::invalid_argument("agreement: view shape mismatch");
  AgreementResult r;
  r.view1 = decode(view1).keypoints;
  r.view2 = decode(view2).keypoints;
  const double ratio = view1.resolution_ratio();
  const auto joints = static_cast<std::size_t>(view1.joints());
  r.distances.assign(joints, std::numeric_limits<double>::infinity());
  r.agree.assign(joints, false);
  for (std::size_t j = 0; j < joints; ++j) {
    if (!r.view1.visible[j] || !r.view2.visible[j]) continue;
    const Point mapped = transform_point(t, r.view1.coords[j]);
    const double dx = (mapped.x - r.view2.coords[j].x) / ratio;
    const double dy = (mapped.y - r.view2.coords[j].y) / ratio;
    r.distances[j] = dx * dx + dy * dy;
    r.agree[j] = r.distances[j] < d_r;
  }
  return r;
}

AgreementResult agreement_check(const ModelParams& model, const ImageTensor& image,
                                const AffineTransform& t, double d_r) {
  if (std::abs(t.determinant()) < 1e-12) throw DegenerateTransform("agreement_check: singular transform");
  if (t.flip) throw std::invalid_argument("agreement_check: transform must not flip");
  const HeatmapStack h1 = forward(model, image);
  const HeatmapStack h2 = forward(model, warp_image(t, image, image.width(), image.height()));
  return agreement_from_outputs(h1, h2, t, d_r);
}

std::string format_epoch_log(std::span<const EpochLog> rows) {
  std::string out = "epoch,lr,loss_s,loss_p,loss_r,loss_t,n_reliable,n_reusable,val_pck05,val_pck10\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6g,%.8f,%.8f,%.8f,%.8f,%zu,%zu,", r.epoch, r.lr, r.loss_s,
                  r.loss_p, r.loss_r, r.loss_t, r.n_reliable, r.n_reusable);
    out += buf;
    if (r.val_pck05 && r.val_pck10) {
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", *r.val_pck05, *r.val_pck10);
      out += buf;
    } else {
      out += ",\n";
    }
  }
  return out;
}

Stage1Result train_stage1(const TrainConfig& cfg, std::span<const LabeledSample> labeled,
                          std::span<const LabeledSample> val, const TrainHooks& hooks) {
  cfg.validate();
  if (labeled.empty()) throw DataError("stage 1 needs at least one labeled image");

  Stage1Result result;
  ModelParams model = init_model({kNumJoints, cfg.head}, stream_seed(cfg.seed, kStage1Stream));
  OptimizerState opt = make_optimizer(model, cfg.lr);
  result.best = model;
  double best_score = -1.0;

  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), 0);
  std::int64_t step = 0;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.stage1_epochs; ++epoch) {
    opt.learning_rate = cfg.learning_rate(epoch, cfg.stage1_epochs);
    Rng shuffle_rng(stream_seed(cfg.seed, kStage1Stream, kShuffleSalt, epoch));
    shuffle_rng.shuffle(order.begin(), order.end());

    EpochLog row;
    row.epoch = epoch;
    row.lr = opt.learning_rate;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++step) {
      const std::size_t n = std::min(batch, order.size() - start);
      std::vector<ImageTensor> images(n);
      std::vector<HeatmapStack> targets(n);
      std::vector<std::vector<bool>> visible(n);
      parallel_for(n, [&](std::size_t s) {
        const auto& sample = labeled[order[start + s]];
        Rng rng(stream_seed(cfg.seed, kStage1Stream, kSlotSalt, (static_cast<std::uint64_t>(step) << 16) | s));
        AugmentedSample aug = augment(cfg, sample.image, rng);
        const Keypoints kp = transform_keypoints(aug.geo, sample.keypoints, sample.image.width(),
                                                 sample.image.height());
        targets[s] = encode_in_frame(kp, cfg, sample.image);
        visible[s] = kp.visible;
        images[s] = std::move(aug.image);
      });
      const TrainPass pass = forward_for_training(model, images);
      BatchLoss ls = supervised_batch_loss(pass.outputs, targets, visible);
      check_finite(ls.value, "supervised loss");
      for (auto& g : ls.grad)
        for (float& v : g.values()) v *= static_cast<float>(cfg.weights.lambda1);
      optimizer_step(model, backward(model, pass, ls.grad), opt);
      if (hooks.on_step) hooks.on_step(step + 1, model, nullptr);
      row.loss_s += ls.value;
      ++batches;
    }
    row.loss_s /= static_cast<double>(batches);

    if (!val.empty() && is_eval_epoch(cfg, epoch, cfg.stage1_epochs)) {
      const Evaluation e = evaluate(model, val, cfg.pck_normalizer);
      row.val_pck05 = e.pck05.overall.rate();
      row.val_pck10 = e.pck10.overall.rate();
      const double score = *row.val_pck10 + 1e-3 * *row.val_pck05;
      if (score > best_score) {
        best_score = score;
        result.best = model;
        result.best_epoch = epoch;
      }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "stage1 epoch %d/%d loss_s %.6f%s", epoch + 1, cfg.stage1_epochs,
                  row.loss_s, row.val_pck10 ? (" val_pck10 " + std::to_string(*row.val_pck10)).c_str() : "");
    say(hooks, buf);
    result.log.push_back(row);
  }
  result.final_model = model;
  if (val.empty()) {
    result.best = model;
    result.best_epoch = cfg.stage1_epochs - 1;
  }
  return result;
}

namespace {

// Everything about one unlabeled batch slot that does not depend on the
// batch-wide small-loss threshold.
struct UnlabeledSlot {
  int sample_id = 0;
  ImageTensor image;  // augmented
  std::vector<int> perm;
  HeatmapStack pseudo_target;
  std::vector<bool> pseudo_valid;  // student frame
  HeatmapStack relabel_target;
  std::vector<bool> relabel_ok;  // student frame: views agree and joint lands in frame
  HeatmapStack aligned_teacher;
};

struct LabeledSlot {
  ImageTensor image;
  HeatmapStack target;
  std::vector<bool> visible;
};

void write_mask_line(std::ostream& os, int epoch, std::int64_t step,
                     const std::vector<UnlabeledSlot>& slots, const SelectionMask& mask) {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["step"] = step;
  auto samples = nlohmann::json::array();
  for (std::size_t s = 0; s < slots.size(); ++s) {
    std::vector<int> states(slots[s].perm.size(), 0);
    for (std::size_t k = 0; k < states.size(); ++k)
      states[static_cast<std::size_t>(slots[s].perm[k])] = static_cast<int>(mask.states[s][k]);
    samples.push_back({{"sample_id", slots[s].sample_id}, {"states", states}});
  }
  j["samples"] = std::move(samples);
  os << j.dump() << '\n';
}

}  // namespace

Stage2Result train_stage2(const TrainConfig& cfg, std::span<const LabeledSample> labeled,
                          std::span<const UnlabeledSample> unlabeled,
                          std::span<const PseudoLabel> pseudo, const ModelParams& stage1,
                          std::span<const LabeledSample> val, const TrainHooks& hooks) {
  cfg.validate();
  if (labeled.empty() && unlabeled.empty()) throw DataError("stage 2 needs labeled or unlabeled images");
  if (stage1.spec().head != cfg.head || stage1.spec().joints != kNumJoints)
    throw ConfigError("stage-1 checkpoint architecture does not match the config head");

  std::map<int, const PseudoLabel*> by_id;
  for (const auto& pl : pseudo) by_id[pl.sample_id] = &pl;
  std::vector<int> missing;
  for (const auto& u : unlabeled) {
    const auto it = by_id.find(u.sample_id);
    if (it == by_id.end() || it->second->coords.size() != static_cast<std::size_t>(kNumJoints))
      missing.push_back(u.sample_id);
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) ids += (i ? "," : "") + std::to_string(missing[i]);
    throw DataError("pseudo labels missing for " + std::to_string(missing.size()) + " unlabeled samples: " + ids);
  }

  const LossWeights& w = cfg.weights;
  const bool use_teacher = cfg.mean_teacher;
  const bool use_pseudo = w.lambda2 > 0.0 && !unlabeled.empty();
  const bool use_reuse = w.lambda3 > 0.0 && !unlabeled.empty();
  const bool use_consistency = use_teacher && w.lambda4 > 0.0 && !unlabeled.empty();
  const bool any_unlabeled = use_pseudo || use_reuse || use_consistency;

  Stage2Result result;
  ModelParams student = stage1;
  std::optional<ModelParams> teacher;
  if (use_teacher) teacher = stage1;
  OptimizerState opt = make_optimizer(student, cfg.lr);

  auto n_labeled = static_cast<std::size_t>(std::lround(cfg.batch_size * cfg.labeled_fraction));
  n_labeled = std::clamp<std::size_t>(n_labeled, 1, static_cast<std::size_t>(cfg.batch_size) - 1);
  std::size_t n_unlabeled = static_cast<std::size_t>(cfg.batch_size) - n_labeled;
  if (unlabeled.empty()) {
    n_labeled = static_cast<std::size_t>(cfg.batch_size);
    n_unlabeled = 0;
  } else if (labeled.empty()) {
    n_labeled = 0;
    n_unlabeled = static_cast<std::size_t>(cfg.batch_size);
  }
  const std::size_t steps_per_epoch =
      n_unlabeled > 0 ? (unlabeled.size() + n_unlabeled - 1) / n_unlabeled
                      : (labeled.size() + n_labeled - 1) / n_labeled;

  std::vector<std::size_t> order(unlabeled.size());
  std::iota(order.begin(), order.end(), 0);
  std::int64_t step = 0;

  for (int epoch = 0; epoch < cfg.stage2_epochs; ++epoch) {
    opt.learning_rate = cfg.learning_rate(epoch, cfg.stage2_epochs);
    Rng shuffle_rng(stream_seed(cfg.seed, kStage2Stream, kShuffleSalt, epoch));
    shuffle_rng.shuffle(order.begin(), order.end());

    EpochLog row;
    row.epoch = epoch;
    row.lr = opt.learning_rate;

    for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
      const std::size_t u_begin = b * n_unlabeled;
      // same schedule without unlabeled losses, only the labeled slots are computed
      const std::size_t u_count =
          n_unlabeled == 0 || !any_unlabeled ? 0 : std::min(n_unlabeled, unlabeled.size() - u_begin);
      std::vector<std::size_t> labeled_pick(n_labeled);
      {
        Rng pick(stream_seed(cfg.seed, kStage2Stream, kLabeledDrawSalt, static_cast<std::uint64_t>(step)));
        for (auto& p : labeled_pick) p = static_cast<std::size_t>(pick.below(labeled.size()));
      }
      const std::size_t n_slots = n_labeled + u_count;
      std::vector<LabeledSlot> lab(n_labeled);
      std::vector<UnlabeledSlot> unl(u_count);
      const ModelParams& agreement_model =
          cfg.agreement_net == AgreementNet::kTeacher && teacher ? *teacher : student;

      parallel_for(n_slots, [&](std::size_t s) {
        Rng rng(stream_seed(cfg.seed, kStage2Stream, kSlotSalt, (static_cast<std::uint64_t>(step) << 16) | s));
        if (s < n_labeled) {
          const auto& sample = labeled[labeled_pick[s]];
          AugmentedSample aug = augment(cfg, sample.image, rng);
          const Keypoints kp = transform_keypoints(aug.geo, sample.keypoints, sample.image.width(),
                                                   sample.image.height());
          lab[s].target = encode_in_frame(kp, cfg, sample.image);
          lab[s].visible = kp.visible;
          lab[s].image = std::move(aug.image);
          return;
        }
        const std::size_t k = s - n_labeled;
        const auto& sample = unlabeled[order[u_begin + k]];
        const PseudoLabel& pl = *by_id.at(sample.sample_id);
        const int width = sample.image.width();
        const int height = sample.image.height();
        UnlabeledSlot& slot = unl[k];
        slot.sample_id = sample.sample_id;
        AugmentedSample aug = augment(cfg, sample.image, rng);
        slot.perm = joint_permutation(aug.geo, kNumJoints);

        Keypoints pkp(kNumJoints);
        pkp.coords = pl.coords;
        pkp.visible = pl.valid;
        const Keypoints pkp_student = transform_keypoints(aug.geo, pkp, width, height);
        slot.pseudo_target = encode_in_frame(pkp_student, cfg, sample.image);
        slot.pseudo_valid = pkp_student.visible;

        if (use_reuse) {
          Rng trng(stream_seed(cfg.seed, kStage2Stream, kAgreementSalt,
                               (static_cast<std::uint64_t>(step) << 16) | s));
          const double rot = trng.uniform(-cfg.augment.weak_rotation_deg, cfg.augment.weak_rotation_deg);
          const double scale = trng.uniform(cfg.augment.weak_scale_min, cfg.augment.weak_scale_max);
          const AffineTransform t =
              make_affine(rot, scale, false, {(width - 1) / 2.0, (height - 1) / 2.0});
          const AgreementResult ag = agreement_check(agreement_model, sample.image, t, cfg.d_r);
          Keypoints relabel = ag.view1;
          for (std::size_t j = 0; j < relabel.size(); ++j) relabel.visible[j] = ag.agree[j];
          const Keypoints relabel_student = transform_keypoints(aug.geo, relabel, width, height);
          slot.relabel_target = encode_in_frame(relabel_student, cfg, sample.image);
          slot.relabel_ok = relabel_student.visible;
        }
        if (use_consistency)
          slot.aligned_teacher = warp_heatmaps(aug.geo, forward(*teacher, sample.image));
        slot.image = std::move(aug.image);
      });

      std::vector<ImageTensor> images;
      images.reserve(n_slots);
      for (auto& l : lab) images.push_back(std::move(l.image));
      for (auto& u : unl) images.push_back(std::move(u.image));
      const TrainPass pass = forward_for_training(student, images);
      const std::span<const HeatmapStack> lab_out(pass.outputs.data(), n_labeled);
      const std::span<const HeatmapStack> unl_out(pass.outputs.data() + n_labeled, u_count);

      std::vector<HeatmapStack> d_out;
      d_out.reserve(n_slots);
      for (const auto& o : pass.outputs) d_out.push_back(zeros_like(o));

      double ls = 0.0, lp = 0.0, lr = 0.0, lt = 0.0;
      if (n_labeled > 0 && w.lambda1 > 0.0) {
        std::vector<HeatmapStack> targets;
        std::vector<std::vector<bool>> visible;
        for (const auto& l : lab) {
          targets.push_back(l.target);
          visible.push_back(l.visible);
        }
        const BatchLoss bl = supervised_batch_loss(lab_out, targets, visible);
        ls = bl.value;
        for (std::size_t s = 0; s < n_labeled; ++s) accumulate(d_out[s], bl.grad[s], w.lambda1);
      }

      SelectionMask mask(u_count, kNumJoints);
      if (u_count > 0 && (use_pseudo || use_reuse)) {
        std::vector<HeatmapStack> targets;
        std::vector<std::vector<bool>> valid;
        for (const auto& u : unl) {
          targets.push_back(u.pseudo_target);
          valid.push_back(u.pseudo_valid);
        }
        PseudoSelection sel = reliable_pseudo_loss(unl_out, targets, valid, cfg.small_loss_percentile);
        if (use_pseudo) {
          lp = sel.loss.value;
          mask = sel.mask;
          for (std::size_t s = 0; s < u_count; ++s) accumulate(d_out[n_labeled + s], sel.loss.grad[s], w.lambda2);
        }
        if (use_reuse) {
          // High-loss pseudo-labeled joints whose two views agree.
          for (std::size_t s = 0; s < u_count; ++s)
            for (int j = 0; j < kNumJoints; ++j)
              if (sel.mask.states[s][j] != JointState::kReliable && unl[s].pseudo_valid[j] &&
                  unl[s].relabel_ok[j])
                mask.states[s][j] = JointState::kReusable;
          std::vector<HeatmapStack> relabels;
          for (const auto& u : unl) relabels.push_back(u.relabel_target);
          const BatchLoss rl = reusable_loss(unl_out, relabels, mask);
          lr = rl.value;
          for (std::size_t s = 0; s < u_count; ++s) accumulate(d_out[n_labeled + s], rl.grad[s], w.lambda3);
        }
      }
      if (u_count > 0 && use_consistency) {
        std::vector<HeatmapStack> aligned;
        for (const auto& u : unl) aligned.push_back(u.aligned_teacher);
        const BatchLoss cl = consistency_loss(unl_out, aligned);
        lt = cl.value;
        for (std::size_t s = 0; s < u_count; ++s) accumulate(d_out[n_labeled + s], cl.grad[s], w.lambda4);
      }
      check_finite(total_loss(ls, lp, lr, lt, w), "stage-2 loss");

      optimizer_step(student, backward(student, pass, d_out), opt);
      if (teacher) ema_update(*teacher, student, cfg.ema_alpha);
      if (hooks.on_step) hooks.on_step(step + 1, student, teacher ? &*teacher : nullptr);
      if (hooks.mask_log && u_count > 0) write_mask_line(*hooks.mask_log, epoch, step, unl, mask);

      row.loss_s += ls;
      row.loss_p += lp;
      row.loss_r += lr;
      row.loss_t += lt;
      row.n_reliable += mask.count(JointState::kReliable);
      row.n_reusable += mask.count(JointState::kReusable);
    }
    const auto steps = static_cast<double>(std::max<std::size_t>(steps_per_epoch, 1));
    row.loss_s /= steps;
    row.loss_p /= steps;
    row.loss_r /= steps;
    row.loss_t /= steps;

    if (!val.empty() && is_eval_epoch(cfg, epoch, cfg.stage2_epochs)) {
      const Evaluation e = evaluate(teacher ? *teacher : student, val, cfg.pck_normalizer);
      row.val_pck05 = e.pck05.overall.rate();
      row.val_pck10 = e.pck10.overall.rate();
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf), "stage2 epoch %d/%d ls %.5f lp %.5f lr %.5f lt %.5f rel %zu reu %zu%s",
                  epoch + 1, cfg.stage2_epochs, row.loss_s, row.loss_p, row.loss_r, row.loss_t,
                  row.n_reliable, row.n_reusable,
                  row.val_pck10 ? (" val_pck10 " + std::to_string(*row.val_pck10)).c_str() : "");
    say(hooks, buf);
    result.log.push_back(row);
  }
  result.student = std::move(student);
  result.teacher = std::move(teacher);
  return result;
}

std::vector<MaskLogEntry> read_mask_log(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read mask log " + path.string());
  std::vector<MaskLogEntry> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MaskLogEntry e;
      e.epoch = j.at("epoch").get<int>();
      e.step = j.at("step").get<std::int64_t>();
      for (const auto& s : j.at("samples")) {
        e.sample_ids.push_back(s.at("sample_id").get<int>());
        std::vector<JointState> states;
        for (const auto& v : s.at("states")) {
          const int x = v.get<int>();
          if (x < 0 || x > 2) throw FormatError("mask state out of range");
          states.push_back(static_cast<JointState>(x));
        }
        e.states.push_back(std::move(states));
      }
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError("mask log " + path.string() + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace scarcenet
