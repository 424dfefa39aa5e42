#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "scarcenet/errors.hpp"
#include "scarcenet/experiment.hpp"
#include "scarcenet/plot.hpp"

using namespace scarcenet;
namespace fs = std::filesystem;

namespace {

LoadedData tiny_data() {
  LoadedData d;
  const auto make = [](int id) {
    const int species = id % 2;
    const auto c = sample_creature(species_params(species), static_cast<std::uint64_t>(id));
    return LabeledSample{id, species, to_tensor(c.image), c.keypoints};
  };
  for (int i = 0; i < 2; ++i) d.labeled.push_back(make(i));
  for (int i = 10; i < 16; ++i) {
    const auto s = make(i);
    d.unlabeled.push_back({s.sample_id, s.species_id, s.image});
  }
  for (int i = 20; i < 22; ++i) d.val.push_back(make(i));
  for (int i = 30; i < 34; ++i) d.test.push_back(make(i));
  return d;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.stage1_epochs = 2;
  c.stage2_epochs = 1;
  c.batch_size = 4;
  return c;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("toggle names") {
  const auto t = parse_toggles("rsr,mt,mb,aug,ssl,rsr");
  CHECK(t == std::vector<Toggle>{Toggle::kRsr, Toggle::kMt, Toggle::kMb, Toggle::kAug, Toggle::kSsl});
  CHECK(parse_toggles("").empty());
  CHECK_THROWS_AS(parse_toggles("rsr,xyz"), ConfigError);
}

TEST_CASE("each toggle switches off exactly its component") {
  const TrainConfig base;
  const auto rsr = apply_toggle(base, Toggle::kRsr);
  CHECK(rsr.weights.lambda3 == 0.0);
  CHECK(rsr.weights.lambda2 == base.weights.lambda2);

  const auto mt = apply_toggle(base, Toggle::kMt);
  CHECK(mt.weights.lambda4 == 0.0);
  CHECK_FALSE(mt.mean_teacher);
  CHECK(mt.weights.lambda3 == base.weights.lambda3);

  CHECK(apply_toggle(base, Toggle::kMb).head == HeadType::kShared);
  CHECK(apply_toggle(base, Toggle::kAug).augmentation == AugmentMode::kWeak);

  const auto ssl = apply_toggle(base, Toggle::kSsl);
  CHECK(ssl.weights.lambda1 == base.weights.lambda1);
  CHECK(ssl.weights.lambda2 == 0.0);
  CHECK(ssl.weights.lambda3 == 0.0);
  CHECK(ssl.weights.lambda4 == 0.0);
}

TEST_CASE("ablation with no toggles reproduces the plain pipeline") {
  const auto data = tiny_data();
  auto cfg = tiny_config();
  cfg.seed = 5;
  const auto plain = run_pipeline(cfg, data);
  const auto abl = run_ablation(tiny_config(), {}, {5}, data);
  REQUIRE(abl.runs.size() == 1);
  CHECK(abl.runs[0].variant == "full");
  CHECK(abl.runs[0].pck10 == plain.test.pck10.overall.rate());
  CHECK(abl.runs[0].pck05 == plain.test.pck05.overall.rate());
  REQUIRE(abl.table.size() == 1);
  CHECK(abl.table[0].pck10_std == 0.0);
}

TEST_CASE("ablation table has one row per variant and writes its artifacts") {
  const auto data = tiny_data();
  const auto dir = fs::temp_directory_path() / "scarcenet_ablation_test";
  fs::remove_all(dir);
  const auto r = run_ablation(tiny_config(), {Toggle::kRsr, Toggle::kMb}, {1, 2}, data, dir);
  CHECK(r.runs.size() == 6);
  REQUIRE(r.table.size() == 3);
  CHECK(r.table[0].variant == "full");
  CHECK(r.table[1].variant == "-rsr");
  CHECK(r.table[2].variant == "-mb");
  for (const auto& row : r.table) {
    CHECK(row.runs == 2);
    CHECK(row.pck10_mean >= 0.0);
    CHECK(row.pck10_mean <= 1.0);
  }
  const auto csv = format_ablation_csv(r);
  CHECK(csv.starts_with("variant,runs,pck05_mean,pck05_std,pck10_mean,pck10_std\nfull,2,"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(fs::exists(dir / "ablation.csv"));
  CHECK(fs::exists(dir / "ablation.txt"));
  CHECK(fs::exists(dir / "-mb_seed2_stage2.csv"));
  CHECK(fs::exists(dir / "full_seed1_test.csv"));
  CHECK_THROWS_AS(run_ablation(tiny_config(), {}, {}, data), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("svg plot of an epoch log") {
  const std::string csv =
      "epoch,lr,loss_s,val_pck10\n"
      "0,0.001,0.5,\n"
      "1,0.001,0.25,0.4\n"
      "2,0.0001,0.125,0.5\n";
  const auto svg = render_svg(csv, "run <1>");
  CHECK(svg.starts_with("<svg"));
  CHECK(svg.find("run &lt;1&gt;") != std::string::npos);
  CHECK(count_of(svg, "<path") == 3);
  CHECK(svg.find(">val_pck10<") != std::string::npos);
  CHECK(render_svg(csv, "run <1>") == svg);

  CHECK_THROWS_AS(render_svg(""), DataError);
  CHECK_THROWS_AS(render_svg("epoch,loss\n"), DataError);
  CHECK_THROWS_AS(render_svg("epoch,name\n0,abc\n"), DataError);
}

TEST_CASE("plot_metrics reads and writes files") {
  const auto dir = fs::temp_directory_path() / "scarcenet_plot_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream(dir / "m.csv") << "epoch,loss\n0,1\n1,0.5\n";
  }
  plot_metrics(dir / "m.csv", dir / "m.svg");
  CHECK(fs::file_size(dir / "m.svg") > 100);
  CHECK_THROWS_AS(plot_metrics(dir / "none.csv", dir / "x.svg"), DataError);
  fs::remove_all(dir);
}
