#include "scarcenet/synthcritters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "scarcenet/errors.hpp"
#include "scarcenet/rng.hpp"

namespace scarcenet {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::uint64_t kSpeciesSalt = 0x5eed5bec1e5ULL;

using Color = std::array<float, 3>;

Point dir(double angle_deg) { return {std::cos(angle_deg * kDeg), std::sin(angle_deg * kDeg)}; }
Point add(Point a, Point b, double s = 1.0) { return {a.x + s * b.x, a.y + s * b.y}; }

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

class Canvas {
 public:
  Canvas() : img_(3, kImageSize, kImageSize) {}

  ImageTensor& image() { return img_; }

  /// Anti-aliased capsule with per-pixel texture noise drawn from `rng`.
  void capsule(Point a, Point b, double radius, const Color& color, double noise, Rng& rng) {
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius - 1)));
    const int x1 = std::min(kImageSize - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius - 1)));
    const int y1 = std::min(kImageSize - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius + 1)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double d = segment_distance({double(x), double(y)}, a, b);
        const double cover = std::clamp(radius - d + 0.5, 0.0, 1.0);
        const double n = noise * rng.normal();
        if (cover <= 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          float& px = img_.at(c, y, x);
          const double target = std::clamp(color[c] + n, 0.0, 1.0);
          px = static_cast<float>((1.0 - cover) * px + cover * target);
        }
      }
  }

  void disc(Point c, double radius, const Color& color, double noise, Rng& rng) {
    capsule(c, c, radius, color, noise, rng);
  }

 private:
  ImageTensor img_;
};

Color scaled(const Color& c, float s) {
  return {std::clamp(c[0] * s, 0.0f, 1.0f), std::clamp(c[1] * s, 0.0f, 1.0f),
          std::clamp(c[2] * s, 0.0f, 1.0f)};
}

float luminance(const Color& c) { return 0.299f * c[0] + 0.587f * c[1] + 0.114f * c[2]; }

// Background palette is derived from the species so that creatures keep a
// luminance gap to their habitat.
Color background_color(const SpeciesParams& sp, Rng& rng) {
  const float lum = luminance(sp.base_color);
  const float base = lum > 0.5f ? static_cast<float>(rng.uniform(0.08, 0.28))
                                : static_cast<float>(rng.uniform(0.72, 0.92));
  return {base + static_cast<float>(rng.uniform(-0.06, 0.06)),
          base + static_cast<float>(rng.uniform(-0.06, 0.06)),
          base + static_cast<float>(rng.uniform(-0.06, 0.06))};
}

void paint_background(Canvas& canvas, const SpeciesParams& sp, Rng& rng) {
  const Color bg = background_color(sp, rng);
  const double gx = rng.uniform(-0.12, 0.12), gy = rng.uniform(-0.12, 0.12);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double freq = rng.uniform(0.25, 0.6);
  auto& img = canvas.image();
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x) {
      double v = gx * (x / 63.0 - 0.5) + gy * (y / 63.0 - 0.5);
      if (sp.background_style == 1) v += 0.06 * std::sin(freq * x + phase) * std::cos(freq * y);
      if (sp.background_style == 2) v += 0.05 * std::sin(freq * (x + y) + phase);
      const double n = 0.04 * rng.normal();
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(std::clamp(bg[c] + v + n, 0.0, 1.0));
    }
  if (sp.background_style == 1) {
    // a few soft blobs ("rocks")
    const int blobs = 2 + static_cast<int>(rng.below(3));
    for (int i = 0; i < blobs; ++i) {
      const Point c{rng.uniform(0, 63), rng.uniform(0, 63)};
      const double r = rng.uniform(3.0, 7.0);
      canvas.disc(c, r, scaled(bg, static_cast<float>(rng.uniform(0.8, 1.2))), 0.02, rng);
    }
  }
}

struct Pose {
  std::array<Point, kNumJoints> joints;
};

Pose sample_pose(const SpeciesParams& sp, Rng& rng) {
  const auto len = [&](const Range& r) { return rng.uniform(r.lo, r.hi); };
  Pose pose;
  auto& j = pose.joints;
  j[kHip] = {0.0, 0.0};
  const double torso_angle = rng.uniform(-20.0, 20.0);
  j[kShoulder] = add(j[kHip], dir(torso_angle), len(sp.torso_length));
  j[kHead] = add(j[kShoulder], dir(rng.uniform(-75.0, 5.0)), len(sp.neck_length));
  j[kTailTip] = add(j[kHip], dir(180.0 + rng.uniform(-50.0, 50.0)), len(sp.tail_length));
  const auto leg = [&](int joint, Point attach) {
    j[joint] = add(attach, dir(90.0 + torso_angle * 0.5 + rng.uniform(-38.0, 38.0)),
                   len(sp.leg_length));
  };
  leg(kLeftFrontFoot, j[kShoulder]);
  leg(kRightFrontFoot, j[kShoulder]);
  leg(kLeftBackFoot, j[kHip]);
  leg(kRightBackFoot, j[kHip]);
  return pose;
}

struct Placement {
  double scale = 1.0;
  Point offset;
  bool mirror = false;
};

Point place(const Placement& pl, Point p) {
  const double x = pl.mirror ? -p.x : p.x;
  return {pl.offset.x + pl.scale * x, pl.offset.y + pl.scale * p.y};
}

Placement fit(const Pose& pose, const SpeciesParams& sp, bool mirror, Rng& rng) {
  const double pad = std::max(sp.head_radius, sp.torso_thickness / 2.0) + 2.0;
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (const auto& p : pose.joints) {
    const double x = mirror ? -p.x : p.x;
    x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
  }
  const double extent = std::max(x1 - x0, y1 - y0) + 2.0 * pad;
  Placement pl;
  pl.mirror = mirror;
  pl.scale = std::min(1.0, (kImageSize - 4.0) / extent);
  const double jitter = 2.0;
  const double cx = (kImageSize - 1) / 2.0 + rng.uniform(-jitter, jitter);
  const double cy = (kImageSize - 1) / 2.0 + rng.uniform(-jitter, jitter);
  pl.offset = {cx - pl.scale * (x0 + x1) / 2.0, cy - pl.scale * (y0 + y1) / 2.0};
  return pl;
}

struct Rendered {
  ImageTensor image;
  ImageTensor background;
  Keypoints keypoints;
};

Rendered render(const SpeciesParams& sp, std::uint64_t seed) {
  Rng rng(stream_seed(seed, 0xC7177E55ULL));
  Canvas canvas;
  paint_background(canvas, sp, rng);
  Rendered out;
  out.background = canvas.image();

  const Pose pose = sample_pose(sp, rng);
  const bool mirror = rng.bernoulli(0.5);
  const Placement pl = fit(pose, sp, mirror, rng);

  Keypoints kp(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) {
    kp.coords[j] = place(pl, pose.joints[j]);
    kp.visible[j] = true;
  }
  // Camera-side limbs belong to the creature's left when it faces +x and to
  // its right when mirrored.
  const int near_front = mirror ? kRightFrontFoot : kLeftFrontFoot;
  const int far_front = mirror ? kLeftFrontFoot : kRightFrontFoot;
  const int near_back = mirror ? kRightBackFoot : kLeftBackFoot;
  const int far_back = mirror ? kLeftBackFoot : kRightBackFoot;
  const double s = pl.scale;
  const double limb = sp.limb_thickness * s / 2.0;
  const double noise = sp.texture_noise;
  const Color body = sp.base_color;
  const Color far_color = scaled(body, 0.62f);
  const Color near_color = scaled(body, 1.0f);
  const auto& c = kp.coords;

  canvas.capsule(c[kShoulder], c[far_front], limb, far_color, noise, rng);
  canvas.capsule(c[kHip], c[far_back], limb, far_color, noise, rng);
  canvas.disc(c[far_front], limb + 0.6, far_color, noise, rng);
  canvas.disc(c[far_back], limb + 0.6, far_color, noise, rng);
  canvas.capsule(c[kHip], c[kTailTip], std::max(0.9, limb * 0.7), scaled(body, 0.85f), noise, rng);
  canvas.capsule(c[kHip], c[kShoulder], sp.torso_thickness * s / 2.0, body, noise, rng);
  canvas.capsule(c[kShoulder], c[kHead], limb * 1.1, body, noise, rng);
  canvas.disc(c[kHead], sp.head_radius * s, scaled(body, 1.1f), noise, rng);
  // eye on the facing side
  const Point eye{c[kHead].x + (mirror ? -1.0 : 1.0) * sp.head_radius * s * 0.45,
                  c[kHead].y - sp.head_radius * s * 0.3};
  canvas.disc(eye, 0.8, {0.05f, 0.05f, 0.05f}, 0.0, rng);
  canvas.capsule(c[kShoulder], c[near_front], limb, near_color, noise, rng);
  canvas.capsule(c[kHip], c[near_back], limb, near_color, noise, rng);
  canvas.disc(c[near_front], limb + 0.6, scaled(body, 1.2f), noise, rng);
  canvas.disc(c[near_back], limb + 0.6, scaled(body, 1.2f), noise, rng);
  // hip marker for a visible root
  canvas.disc(c[kHip], limb * 0.9, scaled(body, 0.75f), noise, rng);

  if (rng.bernoulli(0.1)) {
    const int feet[] = {kLeftFrontFoot, kRightFrontFoot, kLeftBackFoot, kRightBackFoot};
    const int j = feet[rng.below(4)];
    Rng bg_rng(stream_seed(seed, 0xB05ULL));
    const Color occluder = background_color(sp, bg_rng);
    canvas.disc(c[j], limb + 4.0, scaled(occluder, 0.9f), 0.03, rng);
    kp.visible[j] = false;
  }
  for (int j = 0; j < kNumJoints; ++j) {
    const Point p = kp.coords[j];
    if (p.x < 0 || p.y < 0 || p.x > kImageSize - 1 || p.y > kImageSize - 1) kp.visible[j] = false;
  }
  out.image = canvas.image();
  out.keypoints = std::move(kp);
  return out;
}

}  // namespace

const Skeleton& creature_skeleton() {
  static const Skeleton s{
      kNumJoints,
      {{kHip, kShoulder}, {kShoulder, kHead}, {kHip, kTailTip}, {kShoulder, kLeftFrontFoot},
       {kShoulder, kRightFrontFoot}, {kHip, kLeftBackFoot}, {kHip, kRightBackFoot}},
      {{kLeftFrontFoot, kRightFrontFoot}, {kLeftBackFoot, kRightBackFoot}},
      {"hip", "shoulder", "head", "tail_tip", "left_front_foot", "right_front_foot",
       "left_back_foot", "right_back_foot"}};
  return s;
}

SpeciesParams species_params(int species_id) {
  Rng rng(stream_seed(kSpeciesSalt, static_cast<std::uint64_t>(species_id)));
  SpeciesParams sp;
  sp.species_id = species_id;
  const auto range = [&](double lo, double hi, double spread) {
    const double mid = rng.uniform(lo, hi);
    return Range{mid * (1.0 - spread), mid * (1.0 + spread)};
  };
  sp.torso_length = range(13.0, 19.0, 0.12);
  sp.neck_length = range(6.0, 10.0, 0.15);
  sp.leg_length = range(9.0, 14.0, 0.12);
  sp.tail_length = range(7.0, 14.0, 0.2);
  sp.head_radius = rng.uniform(3.0, 4.5);
  sp.limb_thickness = rng.uniform(2.2, 3.4);
  sp.torso_thickness = rng.uniform(5.5, 8.5);
  // saturated color, either bright or dark
  const bool bright = rng.bernoulli(0.5);
  for (auto& ch : sp.base_color)
    ch = static_cast<float>(bright ? rng.uniform(0.55, 1.0) : rng.uniform(0.0, 0.45));
  sp.base_color[rng.below(3)] = bright ? 0.95f : 0.4f;
  sp.texture_noise = rng.uniform(0.02, 0.08);
  sp.background_style = static_cast<int>(rng.below(3));
  return sp;
}

CreatureSample sample_creature(const SpeciesParams& sp, std::uint64_t seed) {
  Rendered r = render(sp, seed);
  return {quantize(r.image), std::move(r.keypoints)};
}

RgbImage render_background(const SpeciesParams& sp, std::uint64_t seed) {
  return quantize(render(sp, seed).background);
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kLabeled: return "labeled";
    case Split::kUnlabeled: return "unlabeled";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "labeled") return Split::kLabeled;
  if (s == "unlabeled") return Split::kUnlabeled;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split tag: " + s);
}

std::size_t DatasetManifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [s](const auto& r) { return r.split == s; }));
}

DatasetManifest build_dataset(int n_species, int per_species, std::uint64_t seed) {
  if (n_species < 1) throw std::invalid_argument("build_dataset: need at least one species");
  if (per_species < 1) throw std::invalid_argument("build_dataset: need at least one sample per species");
  const int n_train = static_cast<int>(std::lround(0.7 * per_species));
  const int n_val = static_cast<int>(std::lround(0.1 * per_species));

  DatasetManifest m;
  for (int s = 0; s < n_species; ++s) {
    const SpeciesParams sp = species_params(s);
    std::vector<int> order(per_species);
    for (int i = 0; i < per_species; ++i) order[i] = i;
    Rng rng(stream_seed(seed, 0x5B117ULL, static_cast<std::uint64_t>(s)));
    rng.shuffle(order.begin(), order.end());
    std::vector<Split> split_of(per_species, Split::kTest);
    for (int k = 0; k < per_species; ++k)
      split_of[order[k]] = k < n_train ? Split::kLabeled : (k < n_train + n_val ? Split::kVal : Split::kTest);

    for (int i = 0; i < per_species; ++i) {
      ManifestRecord r;
      r.sample_id = s * per_species + i;
      r.species_id = s;
      r.seed = stream_seed(seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(i));
      char name[32];
      std::snprintf(name, sizeof(name), "images/%06d.png", r.sample_id);
      r.path = name;
      r.split = split_of[i];
      r.keypoints = render(sp, r.seed).keypoints;
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

DatasetManifest split_scarce(const DatasetManifest& m, int labels_per_species, SplitMode mode,
                             std::uint64_t seed, const std::vector<int>& labeled_species) {
  DatasetManifest out = m;
  std::map<int, std::vector<std::size_t>> train_by_species;
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    auto& r = out.records[i];
    if (r.split == Split::kLabeled || r.split == Split::kUnlabeled) {
      train_by_species[r.species_id].push_back(i);
      r.split = Split::kUnlabeled;
    }
  }
  if (mode == SplitMode::kFamilyTransfer) {
    const std::set<int> group(labeled_species.begin(), labeled_species.end());
    if (group.empty()) throw std::invalid_argument("split_scarce: empty labeled group");
    for (const int s : group)
      if (!train_by_species.count(s))
        throw std::invalid_argument("split_scarce: species " + std::to_string(s) + " has no training images");
    for (auto& r : out.records)
      if (r.split == Split::kUnlabeled && group.count(r.species_id)) r.split = Split::kLabeled;
    return out;
  }
  if (labels_per_species < 0) throw std::invalid_argument("split_scarce: negative label count");
  for (auto& [species, idx] : train_by_species) {
    if (static_cast<std::size_t>(labels_per_species) > idx.size())
      throw std::invalid_argument("split_scarce: species " + std::to_string(species) + " has only " +
                                  std::to_string(idx.size()) + " training images");
    Rng rng(stream_seed(seed, 0x1ABE1ULL, static_cast<std::uint64_t>(species)));
    rng.shuffle(idx.begin(), idx.end());
    for (int k = 0; k < labels_per_species; ++k) out.records[idx[k]].split = Split::kLabeled;
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write manifest: " + path.string());
  for (const auto& r : m.records) {
    nlohmann::ordered_json j;
    j["sample_id"] = r.sample_id;
    j["species_id"] = r.species_id;
    j["seed"] = r.seed;
    j["path"] = r.path;
    j["split"] = to_string(r.split);
    auto kpts = nlohmann::json::array();
    for (std::size_t k = 0; k < r.keypoints.size(); ++k)
      kpts.push_back({r.keypoints.coords[k].x, r.keypoints.coords[k].y, r.keypoints.visible[k] ? 1 : 0});
    j["kpts"] = std::move(kpts);
    os << j.dump() << '\n';
  }
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read manifest: " + path.string());
  DatasetManifest m;
  std::set<int> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestRecord r;
      r.sample_id = j.at("sample_id").get<int>();
      r.species_id = j.at("species_id").get<int>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.path = j.at("path").get<std::string>();
      r.split = parse_split(j.at("split").get<std::string>());
      const auto& kpts = j.at("kpts");
      r.keypoints = Keypoints(kpts.size());
      for (std::size_t k = 0; k < kpts.size(); ++k) {
        r.keypoints.coords[k] = {kpts[k].at(0).get<double>(), kpts[k].at(1).get<double>()};
        const auto& v = kpts[k].at(2);
        r.keypoints.visible[k] = v.is_boolean() ? v.get<bool>() : v.get<double>() != 0.0;
      }
      if (!ids.insert(r.sample_id).second)
        throw DataError("duplicate sample_id " + std::to_string(r.sample_id));
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

void write_dataset(const std::filesystem::path& dir, const DatasetManifest& m) {
  std::filesystem::create_directories(dir / "images");
  std::map<int, SpeciesParams> species;
  for (const auto& r : m.records) {
    auto it = species.find(r.species_id);
    if (it == species.end()) it = species.emplace(r.species_id, species_params(r.species_id)).first;
    write_png(dir / r.path, sample_creature(it->second, r.seed).image);
  }
  write_manifest(dir / kManifestName, m);
}

DatasetLoader::DatasetLoader(std::filesystem::path dir)
    : dir_(std::move(dir)), manifest_(read_manifest(dir_ / kManifestName)) {}

DatasetLoader::DatasetLoader(std::filesystem::path dir, DatasetManifest manifest)
    : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

ImageTensor DatasetLoader::load(const ManifestRecord& r) const {
  return to_tensor(read_png(dir_ / r.path));
}

std::vector<LabeledSample> DatasetLoader::annotated(Split s) const {
  if (s == Split::kUnlabeled)
    throw std::invalid_argument("annotations of unlabeled records are not exposed");
  std::vector<LabeledSample> out;
  std::vector<int> missing;
  for (const auto& r : manifest_.records) {
    if (r.split != s) continue;
    if (!std::filesystem::exists(dir_ / r.path)) {
      missing.push_back(r.sample_id);
      continue;
    }
    out.push_back({r.sample_id, r.species_id, load(r), r.keypoints});
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "missing images for sample_ids:";
    for (int id : missing) os << ' ' << id;
    throw DataError(os.str());
  }
  return out;
}

std::vector<UnlabeledSample> DatasetLoader::unlabeled() const {
  std::vector<UnlabeledSample> out;
  std::vector<int> missing;
  for (const auto& r : manifest_.records) {
    if (r.split != Split::kUnlabeled) continue;
    if (!std::filesystem::exists(dir_ / r.path)) {
      missing.push_back(r.sample_id);
      continue;
    }
    out.push_back({r.sample_id, r.species_id, load(r)});
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "missing images for sample_ids:";
    for (int id : missing) os << ' ' << id;
    throw DataError(os.str());
  }
  return out;
}

}  // namespace scarcenet
