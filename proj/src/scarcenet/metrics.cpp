#include "scarcenet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "scarcenet/errors.hpp"
#include "scarcenet/heatmap.hpp"

namespace scarcenet {

double pck_normalizer(const Keypoints& gt, PckNormalizer normalizer, double image_side) {
  if (normalizer == PckNormalizer::kImageSide) return image_side;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  bool any = false;
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (!gt.visible[j]) continue;
    const Point p = gt.coords[j];
    if (!any) {
      x0 = x1 = p.x;
      y0 = y1 = p.y;
      any = true;
    }
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return std::max(x1 - x0, y1 - y0);
}

PckReport pck(std::span<const KeypointSet> preds, std::span<const KeypointSet> gts, double tau,
              PckNormalizer normalizer, double image_side) {
  if (preds.size() != gts.size()) throw DataError("pck: prediction and ground-truth counts differ");
  PckReport r;
  r.tau = tau;
  for (std::size_t s = 0; s < gts.size(); ++s) {
    const auto& g = gts[s];
    const auto& p = preds[s];
    if (p.sample_id != g.sample_id)
      throw DataError("pck: sample id mismatch (" + std::to_string(p.sample_id) + " vs " +
                      std::to_string(g.sample_id) + ")");
    if (p.keypoints.size() != g.keypoints.size()) throw DataError("pck: joint count mismatch");
    if (r.per_joint.size() < g.keypoints.size()) r.per_joint.resize(g.keypoints.size());
    const double limit = tau * pck_normalizer(g.keypoints, normalizer, image_side);
    auto& species = r.per_species[g.species_id];
    for (std::size_t j = 0; j < g.keypoints.size(); ++j) {
      if (!g.keypoints.visible[j]) continue;
      const double dx = p.keypoints.coords[j].x - g.keypoints.coords[j].x;
      const double dy = p.keypoints.coords[j].y - g.keypoints.coords[j].y;
      const bool ok = p.keypoints.visible[j] && std::sqrt(dx * dx + dy * dy) <= limit;
      for (PckRate* rate : {&r.per_joint[j], &species, &r.overall}) {
        ++rate->total;
        rate->correct += ok ? 1 : 0;
      }
    }
  }
  return r;
}

Evaluation evaluate(const ModelParams& model, std::span<const LabeledSample> samples,
                    PckNormalizer normalizer) {
  std::vector<ImageTensor> images;
  images.reserve(samples.size());
  for (const auto& s : samples) images.push_back(s.image);
  const auto outputs = forward(model, images);

  Evaluation e;
  std::vector<KeypointSet> gts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    e.predictions.push_back({samples[i].sample_id, samples[i].species_id, decode(outputs[i]).keypoints});
    gts.push_back({samples[i].sample_id, samples[i].species_id, samples[i].keypoints});
  }
  const double side = samples.empty() ? kImageSize
                                      : std::max(samples[0].image.width(), samples[0].image.height());
  e.pck05 = pck(e.predictions, gts, 0.05, normalizer, side);
  e.pck10 = pck(e.predictions, gts, 0.10, normalizer, side);
  return e;
}

std::string format_evaluation_csv(const Evaluation& e, const std::vector<std::string>& joint_names) {
  std::string out = "scope,name,pck05,pck10,count\n";
  char buf[160];
  const auto row = [&](const char* scope, const std::string& name, const PckRate& a, const PckRate& b) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%zu\n", scope, name.c_str(), a.rate(), b.rate(), a.total);
    out += buf;
  };
  for (std::size_t j = 0; j < e.pck10.per_joint.size(); ++j)
    row("joint", j < joint_names.size() ? joint_names[j] : std::to_string(j), e.pck05.per_joint[j],
        e.pck10.per_joint[j]);
  for (const auto& [species, rate] : e.pck10.per_species)
    row("species", std::to_string(species), e.pck05.per_species.at(species), rate);
  row("overall", "all", e.pck05.overall, e.pck10.overall);
  return out;
}

}  // namespace scarcenet
