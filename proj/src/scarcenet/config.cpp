#include "scarcenet/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "scarcenet/errors.hpp"

namespace scarcenet {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

Field real(double TrainConfig::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = to_double(k, v); },
          [m](const TrainConfig& c) { return fmt(c.*m); }};
}

template <typename Getter>
Field real_at(Getter g) {
  return {[g](TrainConfig& c, const std::string& k, const std::string& v) { g(c) = to_double(k, v); },
          [g](const TrainConfig& c) { return fmt(g(const_cast<TrainConfig&>(c))); }};
}

Field integer(int TrainConfig::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) {
            c.*m = static_cast<int>(to_int(k, v));
          },
          [m](const TrainConfig& c) { return std::to_string(c.*m); }};
}

template <typename E>
Field choice(E TrainConfig::*m, std::vector<std::pair<std::string, E>> options) {
  return {[m, options](TrainConfig& c, const std::string& k, const std::string& v) {
            for (const auto& [name, e] : options)
              if (name == v) {
                c.*m = e;
                return;
              }
            throw ConfigError("config key '" + k + "': unsupported value '" + v + "'");
          },
          [m, options](const TrainConfig& c) {
            for (const auto& [name, e] : options)
              if (c.*m == e) return name;
            return std::string("?");
          }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = [] {
    std::vector<std::pair<std::string, Field>> v;
    v.emplace_back("lambda1", real_at([](TrainConfig& c) -> double& { return c.weights.lambda1; }));
    v.emplace_back("lambda2", real_at([](TrainConfig& c) -> double& { return c.weights.lambda2; }));
    v.emplace_back("lambda3", real_at([](TrainConfig& c) -> double& { return c.weights.lambda3; }));
    v.emplace_back("lambda4", real_at([](TrainConfig& c) -> double& { return c.weights.lambda4; }));
    v.emplace_back("small_loss_percentile", real(&TrainConfig::small_loss_percentile));
    v.emplace_back("d_r", real(&TrainConfig::d_r));
    v.emplace_back("ema_alpha", real(&TrainConfig::ema_alpha));
    v.emplace_back("tau_conf", real(&TrainConfig::tau_conf));
    v.emplace_back("lr", real(&TrainConfig::lr));
    v.emplace_back("lr_drop1", real(&TrainConfig::lr_drop1));
    v.emplace_back("lr_drop2", real(&TrainConfig::lr_drop2));
    v.emplace_back("lr_decay", real(&TrainConfig::lr_decay));
    v.emplace_back("batch_size", integer(&TrainConfig::batch_size));
    v.emplace_back("labeled_fraction", real(&TrainConfig::labeled_fraction));
    v.emplace_back("stage1_epochs", integer(&TrainConfig::stage1_epochs));
    v.emplace_back("stage2_epochs", integer(&TrainConfig::stage2_epochs));
    v.emplace_back("seed", Field{[](TrainConfig& c, const std::string& k, const std::string& s) {
                                   const auto n = to_int(k, s);
                                   if (n < 0) throw ConfigError("config key 'seed': must be non-negative");
                                   c.seed = static_cast<std::uint64_t>(n);
                                 },
                                 [](const TrainConfig& c) { return std::to_string(c.seed); }});
    v.emplace_back("sigma", real(&TrainConfig::sigma));
    v.emplace_back("eval_every", integer(&TrainConfig::eval_every));
    v.emplace_back("agreement_net", choice(&TrainConfig::agreement_net,
                                           {{"student", AgreementNet::kStudent}, {"teacher", AgreementNet::kTeacher}}));
    v.emplace_back("head", choice(&TrainConfig::head,
                                  {{"multi", HeadType::kMultiBranch}, {"shared", HeadType::kShared}}));
    v.emplace_back("augmentation", choice(&TrainConfig::augmentation,
                                          {{"strong", AugmentMode::kStrong}, {"weak", AugmentMode::kWeak}}));
    v.emplace_back("mean_teacher",
                   Field{[](TrainConfig& c, const std::string& k, const std::string& s) { c.mean_teacher = to_bool(k, s); },
                         [](const TrainConfig& c) { return std::string(c.mean_teacher ? "true" : "false"); }});
    v.emplace_back("pck_normalizer", choice(&TrainConfig::pck_normalizer,
                                            {{"bbox", PckNormalizer::kBoundingBox}, {"image", PckNormalizer::kImageSide}}));
    v.emplace_back("weak_rotation", real_at([](TrainConfig& c) -> double& { return c.augment.weak_rotation_deg; }));
    v.emplace_back("weak_scale_min", real_at([](TrainConfig& c) -> double& { return c.augment.weak_scale_min; }));
    v.emplace_back("weak_scale_max", real_at([](TrainConfig& c) -> double& { return c.augment.weak_scale_max; }));
    v.emplace_back("strong_rotation", real_at([](TrainConfig& c) -> double& { return c.augment.strong_rotation_deg; }));
    v.emplace_back("strong_scale_min", real_at([](TrainConfig& c) -> double& { return c.augment.strong_scale_min; }));
    v.emplace_back("strong_scale_max", real_at([](TrainConfig& c) -> double& { return c.augment.strong_scale_max; }));
    v.emplace_back("strong_flip_prob", real_at([](TrainConfig& c) -> double& { return c.augment.strong_flip_prob; }));
    v.emplace_back("photometric_ops",
                   Field{[](TrainConfig& c, const std::string& k, const std::string& s) {
                           c.augment.photometric_ops = static_cast<int>(to_int(k, s));
                         },
                         [](const TrainConfig& c) { return std::to_string(c.augment.photometric_ops); }});
    return v;
  }();
  return f;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields())
    if (name == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return k;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, key, value);
}

std::string TrainConfig::get(const std::string& key) const { return field(key).get(*this); }

void TrainConfig::validate() const {
  const auto fail = [](const std::string& m) { throw ConfigError(m); };
  const LossWeights& w = weights;
  if (w.lambda1 < 0 || w.lambda2 < 0 || w.lambda3 < 0 || w.lambda4 < 0) fail("loss weights must be >= 0");
  if (!(small_loss_percentile > 0 && small_loss_percentile <= 100)) fail("small_loss_percentile must lie in (0, 100]");
  if (!(d_r > 0)) fail("d_r must be > 0");
  if (!(ema_alpha >= 0 && ema_alpha <= 1)) fail("ema_alpha must lie in [0, 1]");
  if (!(lr >= 0)) fail("lr must be >= 0");
  if (!(lr_drop1 >= 0 && lr_drop1 <= lr_drop2 && lr_drop2 <= 1)) fail("need 0 <= lr_drop1 <= lr_drop2 <= 1");
  if (!(lr_decay > 0 && lr_decay <= 1)) fail("lr_decay must lie in (0, 1]");
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (!(labeled_fraction > 0 && labeled_fraction < 1)) fail("labeled_fraction must lie in (0, 1)");
  if (stage1_epochs < 0 || stage2_epochs < 0) fail("epoch counts must be >= 0");
  if (!(sigma > 0)) fail("sigma must be > 0");
  if (eval_every < 1) fail("eval_every must be >= 1");
  const AugmentRanges& a = augment;
  if (a.weak_rotation_deg < 0 || a.strong_rotation_deg < 0) fail("rotation ranges must be >= 0");
  if (!(a.weak_scale_min > 0 && a.weak_scale_min <= a.weak_scale_max)) fail("weak scale range invalid");
  if (!(a.strong_scale_min > 0 && a.strong_scale_min <= a.strong_scale_max)) fail("strong scale range invalid");
  if (!(a.strong_flip_prob >= 0 && a.strong_flip_prob <= 1)) fail("strong_flip_prob must lie in [0, 1]");
  if (a.photometric_ops < 0 || a.photometric_ops > 5) fail("photometric_ops must lie in [0, 5]");
}

double TrainConfig::learning_rate(int epoch, int epochs) const {
  double rate = lr;
  if (epoch >= static_cast<int>(std::lround(lr_drop1 * epochs))) rate *= lr_decay;
  if (epoch >= static_cast<int>(std::lround(lr_drop2 * epochs))) rate *= lr_decay;
  return rate;
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.set(key, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& key : TrainConfig::keys()) out += key + " = " + cfg.get(key) + "\n";
  return out;
}

void save_config(const std::filesystem::path& path, const TrainConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write config file " + path.string());
  os << format_config(cfg);
}

}  // namespace scarcenet
