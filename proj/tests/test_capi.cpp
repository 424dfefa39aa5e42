#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "scarcenet/scarcenet.h"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Config {
  sn_config* cfg = nullptr;
  ~Config() { sn_config_free(cfg); }
};

struct Model {
  sn_model* m = nullptr;
  ~Model() { sn_model_free(m); }
};

const char* kTinyConfig =
    "stage1_epochs = 2\n"
    "stage2_epochs = 1\n"
    "batch_size = 4\n"
    "eval_every = 1\n";

}  // namespace

TEST_CASE("version and error state") {
  CHECK(std::strlen(sn_version()) > 0);
  Config c;
  CHECK(sn_config_parse("lambda9 = 1\n", &c.cfg) == SN_ERR_CONFIG);
  CHECK(c.cfg == nullptr);
  CHECK(std::string(sn_last_error()).find("lambda9") != std::string::npos);
  CHECK(sn_config_new(nullptr) == SN_ERR_CONFIG);
}

TEST_CASE("config handle get/set/save") {
  Config c;
  REQUIRE(sn_config_new(&c.cfg) == SN_OK);
  char buf[64];
  std::size_t needed = 0;
  REQUIRE(sn_config_get(c.cfg, "d_r", buf, sizeof(buf), &needed) == SN_OK);
  CHECK(std::string(buf) == "0.6");
  CHECK(needed == 4);
  char small[2] = {'x', 'y'};
  needed = 0;
  CHECK(sn_config_get(c.cfg, "d_r", small, sizeof(small), &needed) == SN_OK);
  CHECK(needed == 4);
  CHECK(small[0] == 'x');
  CHECK(sn_config_set(c.cfg, "lambda3", "0") == SN_OK);
  CHECK(sn_config_set(c.cfg, "lambda3", "-1") == SN_ERR_CONFIG);
  REQUIRE(sn_config_get(c.cfg, "lambda3", buf, sizeof(buf), nullptr) == SN_OK);
  CHECK(std::string(buf) == "0");
  CHECK(sn_config_set(c.cfg, "bogus", "1") == SN_ERR_CONFIG);

  const auto path = fs::temp_directory_path() / "scarcenet_capi.conf";
  REQUIRE(sn_config_save(c.cfg, path.c_str()) == SN_OK);
  Config d;
  REQUIRE(sn_config_load(path.c_str(), &d.cfg) == SN_OK);
  REQUIRE(sn_config_get(d.cfg, "lambda3", buf, sizeof(buf), nullptr) == SN_OK);
  CHECK(std::string(buf) == "0");
  fs::remove(path);
  Config e;
  CHECK(sn_config_load(path.c_str(), &e.cfg) == SN_ERR_CONFIG);
}

TEST_CASE("model handles") {
  Model m;
  REQUIRE(sn_model_init(8, 0, 3, &m.m) == SN_OK);
  CHECK(sn_model_joints(m.m) == 8);
  CHECK(sn_model_parameter_count(m.m) > 1000);
  std::vector<float> img(3 * 64 * 64, 0.5f), xy(16), scores(8);
  REQUIRE(sn_model_predict(m.m, img.data(), 64, 64, xy.data(), scores.data()) == SN_OK);
  for (const float v : xy) {
    CHECK(v >= 0.0f);
    CHECK(v <= 63.0f);
  }
  CHECK(sn_model_predict(m.m, img.data(), 62, 62, xy.data(), scores.data()) == SN_ERR_CONFIG);

  const auto path = fs::temp_directory_path() / "scarcenet_capi_model.ckpt";
  REQUIRE(sn_model_save(m.m, path.c_str()) == SN_OK);
  Model back;
  REQUIRE(sn_model_load(path.c_str(), &back.m) == SN_OK);
  std::vector<float> xy2(16), scores2(8);
  REQUIRE(sn_model_predict(back.m, img.data(), 64, 64, xy2.data(), scores2.data()) == SN_OK);
  CHECK(xy == xy2);
  CHECK(scores == scores2);
  {
    std::ofstream(path, std::ios::binary) << "garbage";
  }
  Model bad;
  CHECK(sn_model_load(path.c_str(), &bad.m) == SN_ERR_DATA);
  fs::remove(path);
  CHECK(sn_model_load(path.c_str(), &bad.m) == SN_ERR_DATA);
  CHECK(sn_model_init(0, 0, 1, &bad.m) == SN_ERR_CONFIG);
}

TEST_CASE("pipeline through the C API") {
  const auto root = fs::temp_directory_path() / "scarcenet_capi_pipeline";
  fs::remove_all(root);
  const auto data = root / "data";
  REQUIRE(sn_dataset_generate(2, 10, 7, data.c_str()) == SN_OK);
  const auto manifest = data / "manifest.jsonl";
  CHECK(sn_dataset_split(manifest.c_str(), 99, nullptr, 0, 1, nullptr) == SN_ERR_CONFIG);
  const int group[] = {5};
  CHECK(sn_dataset_split(manifest.c_str(), 0, group, 1, 1, nullptr) == SN_ERR_CONFIG);
  REQUIRE(sn_dataset_split(manifest.c_str(), 2, nullptr, 0, 1, nullptr) == SN_OK);

  Config c;
  REQUIRE(sn_config_parse(kTinyConfig, &c.cfg) == SN_OK);
  const auto s1 = root / "s1";
  REQUIRE(sn_train_stage1(c.cfg, data.c_str(), s1.c_str()) == SN_OK);
  for (const char* f : {"stage1.ckpt", "stage1_final.ckpt", "stage1_log.csv", "config.txt"})
    CHECK(fs::exists(s1 / f));

  const auto pl = root / "pseudo.jsonl";
  REQUIRE(sn_pseudo_label((s1 / "stage1.ckpt").c_str(), data.c_str(), 0.4, pl.c_str()) == SN_OK);
  CHECK(fs::file_size(pl) > 0);

  const auto s2 = root / "s2";
  REQUIRE(sn_train_stage2(c.cfg, data.c_str(), (s1 / "stage1.ckpt").c_str(), pl.c_str(), s2.c_str()) == SN_OK);
  for (const char* f : {"student.ckpt", "teacher.ckpt", "stage2_log.csv", "masks.jsonl", "config.txt"})
    CHECK(fs::exists(s2 / f));
  CHECK(sn_train_stage2(c.cfg, data.c_str(), (s1 / "stage1.ckpt").c_str(), (root / "none.jsonl").c_str(),
                        (root / "s2b").c_str()) == SN_ERR_DATA);

  double p05 = -1, p10 = -1;
  const auto csv1 = root / "eval1.csv", csv2 = root / "eval2.csv";
  REQUIRE(sn_evaluate(s2.c_str(), data.c_str(), "test", 1, csv1.c_str(), &p05, &p10) == SN_OK);
  CHECK(p10 >= 0.0);
  CHECK(p10 <= 1.0);
  CHECK(p05 <= p10);
  REQUIRE(sn_evaluate(s2.c_str(), data.c_str(), "test", 1, csv2.c_str(), nullptr, nullptr) == SN_OK);
  CHECK(slurp(csv1) == slurp(csv2));

  double t10 = -1, s10 = -1, dir_student = -1;
  REQUIRE(sn_evaluate((s2 / "teacher.ckpt").c_str(), data.c_str(), "test", 0, nullptr, nullptr, &t10) == SN_OK);
  REQUIRE(sn_evaluate((s2 / "student.ckpt").c_str(), data.c_str(), "test", 0, nullptr, nullptr, &s10) == SN_OK);
  REQUIRE(sn_evaluate(s2.c_str(), data.c_str(), "test", 0, nullptr, nullptr, &dir_student) == SN_OK);
  CHECK(t10 == p10);
  CHECK(dir_student == s10);

  CHECK(sn_evaluate(s2.c_str(), data.c_str(), "train", 1, nullptr, nullptr, nullptr) == SN_ERR_CONFIG);
  CHECK(sn_evaluate((root / "missing.ckpt").c_str(), data.c_str(), "val", 1, nullptr, nullptr, nullptr) ==
        SN_ERR_DATA);

  const auto svg = root / "log.svg";
  REQUIRE(sn_plot((s2 / "stage2_log.csv").c_str(), svg.c_str()) == SN_OK);
  CHECK(fs::file_size(svg) > 0);

  const std::uint64_t seeds[] = {1};
  CHECK(sn_ablate(c.cfg, "rsr,bogus", seeds, 1, data.c_str(), (root / "abl").c_str()) == SN_ERR_CONFIG);
  REQUIRE(sn_ablate(c.cfg, "mt", seeds, 1, data.c_str(), (root / "abl").c_str()) == SN_OK);
  CHECK(fs::exists(root / "abl" / "ablation.csv"));
  fs::remove_all(root);
}

TEST_CASE("log callback receives progress messages") {
  std::vector<std::string> seen;
  sn_set_log_callback([](const char* m, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(m); },
                      &seen);
  const auto root = fs::temp_directory_path() / "scarcenet_capi_log";
  fs::remove_all(root);
  REQUIRE(sn_dataset_generate(1, 10, 3, (root / "data").c_str()) == SN_OK);
  REQUIRE(sn_dataset_split((root / "data" / "manifest.jsonl").c_str(), 2, nullptr, 0, 1, nullptr) == SN_OK);
  Config c;
  REQUIRE(sn_config_parse(kTinyConfig, &c.cfg) == SN_OK);
  REQUIRE(sn_train_stage1(c.cfg, (root / "data").c_str(), (root / "s1").c_str()) == SN_OK);
  sn_set_log_callback(nullptr, nullptr);
  CHECK(seen.size() >= 2);
  fs::remove_all(root);
}
