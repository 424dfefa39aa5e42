// Command-line front end; talks to the library only through the C API.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "scarcenet/scarcenet.h"

namespace {

constexpr int kUsageError = SN_ERR_CONFIG;

int report(sn_status s) {
  if (s != SN_OK) std::cerr << "error: " << sn_last_error() << "\n";
  return static_cast<int>(s);
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "not a non-negative integer: '" + item + "'");
    }
  }
  if (out.empty()) throw CLI::ValidationError(what, "empty list");
  return out;
}

struct ConfigHandle {
  sn_config* cfg = nullptr;
  ~ConfigHandle() { sn_config_free(cfg); }
};

void print_log(const char* message, void*) { std::cerr << message << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised keypoint estimation with scarce annotations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sn_version());
  bool quiet = false;
  int threads = 1;
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  int exit_code = 0;
  std::function<void()> action;

  // dataset ------------------------------------------------------------
  auto* dataset = app.add_subcommand("dataset", "Generate or split a synthetic dataset");
  dataset->require_subcommand(1);

  int species = 0, per_species = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen = dataset->add_subcommand("gen", "Render a synthetic creature dataset");
  gen->add_option("--species", species, "Number of species")->required()->check(CLI::PositiveNumber);
  gen->add_option("--per-species", per_species, "Images per species")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Generator seed")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->callback([&] { action = [&] {
    exit_code = report(sn_dataset_generate(species, per_species, gen_seed, gen_out.c_str()));
  }; });

  std::string split_manifest, family, split_out;
  int labels_per_species = 0;
  std::uint64_t split_seed = 0;
  auto* split = dataset->add_subcommand("split", "Tag training records as labeled or unlabeled");
  split->add_option("--manifest", split_manifest, "manifest.jsonl to split")->required();
  auto* per = split->add_option("--labels-per-species", labels_per_species, "Labeled images per species")
                  ->check(CLI::NonNegativeNumber);
  auto* fam = split->add_option("--family-transfer", family,
                                "Comma-separated species ids whose training images are all labeled");
  per->excludes(fam);
  fam->excludes(per);
  split->add_option("--seed", split_seed, "Split seed")->required();
  split->add_option("--out", split_out, "Write the split manifest here instead of in place");
  split->callback([&] { action = [&] {
    if (!*per && !*fam) throw CLI::RequiredError("--labels-per-species or --family-transfer");
    const char* out = split_out.empty() ? nullptr : split_out.c_str();
    if (*fam) {
      const auto group = parse_list<int>(family, "--family-transfer");
      exit_code = report(sn_dataset_split(split_manifest.c_str(), 0, group.data(), group.size(), split_seed, out));
    } else {
      exit_code = report(sn_dataset_split(split_manifest.c_str(), labels_per_species, nullptr, 0, split_seed, out));
    }
  }; });

  // train ----------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Run a training stage");
  train->require_subcommand(1);

  std::string s1_config, s1_data, s1_out;
  auto* stage1 = train->add_subcommand("stage1", "Supervised training on the labeled images");
  stage1->add_option("--config", s1_config, "Config file (key = value)")->required();
  stage1->add_option("--data", s1_data, "Dataset directory")->required();
  stage1->add_option("--out", s1_out, "Output directory")->required();
  stage1->callback([&] { action = [&] {
    ConfigHandle h;
    if ((exit_code = report(sn_config_load(s1_config.c_str(), &h.cfg))) != 0) return;
    exit_code = report(sn_train_stage1(h.cfg, s1_data.c_str(), s1_out.c_str()));
  }; });

  std::string s2_config, s2_data, s2_stage1, s2_pseudo, s2_out;
  auto* stage2 = train->add_subcommand("stage2", "Semi-supervised training with pseudo labels");
  stage2->add_option("--config", s2_config, "Config file (key = value)")->required();
  stage2->add_option("--data", s2_data, "Dataset directory")->required();
  stage2->add_option("--stage1", s2_stage1, "Stage-1 checkpoint")->required();
  stage2->add_option("--pseudo", s2_pseudo, "Pseudo-label cache")->required();
  stage2->add_option("--out", s2_out, "Output directory")->required();
  stage2->callback([&] { action = [&] {
    ConfigHandle h;
    if ((exit_code = report(sn_config_load(s2_config.c_str(), &h.cfg))) != 0) return;
    exit_code = report(
        sn_train_stage2(h.cfg, s2_data.c_str(), s2_stage1.c_str(), s2_pseudo.c_str(), s2_out.c_str()));
  }; });

  // pseudo-label -----------------------------------------------------------
  std::string pl_ckpt, pl_data, pl_out;
  double tau_conf = 0.4;
  auto* pseudo = app.add_subcommand("pseudo-label", "Label the unlabeled images with a stage-1 model");
  pseudo->add_option("--checkpoint", pl_ckpt, "Stage-1 checkpoint")->required();
  pseudo->add_option("--data", pl_data, "Dataset directory")->required();
  pseudo->add_option("--tau-conf", tau_conf, "Confidence threshold")->required()->check(CLI::NonNegativeNumber);
  pseudo->add_option("--out", pl_out, "Output JSON-lines file")->required();
  pseudo->callback([&] { action = [&] {
    exit_code = report(sn_pseudo_label(pl_ckpt.c_str(), pl_data.c_str(), tau_conf, pl_out.c_str()));
  }; });

  // evaluate ---------------------------------------------------------------
  std::string ev_ckpt, ev_data, ev_split, ev_teacher = "true", ev_out;
  auto* evaluate = app.add_subcommand("evaluate", "PCK of a checkpoint on the val or test split");
  evaluate->add_option("--checkpoint", ev_ckpt, "Checkpoint file or stage-2 directory")->required();
  evaluate->add_option("--data", ev_data, "Dataset directory")->required();
  evaluate->add_option("--split", ev_split, "val or test")->required()->check(CLI::IsMember({"val", "test"}));
  evaluate->add_option("--use-teacher", ev_teacher, "Prefer the teacher checkpoint when present")
      ->check(CLI::IsMember({"true", "false"}));
  evaluate->add_option("--out", ev_out, "Write the per-joint/per-species CSV here");
  evaluate->callback([&] { action = [&] {
    double p05 = 0.0, p10 = 0.0;
    exit_code = report(sn_evaluate(ev_ckpt.c_str(), ev_data.c_str(), ev_split.c_str(), ev_teacher == "true",
                                   ev_out.empty() ? nullptr : ev_out.c_str(), &p05, &p10));
    if (exit_code == 0) std::printf("pck05 %.6f\npck10 %.6f\n", p05, p10);
  }; });

  // ablate -----------------------------------------------------------------
  std::string ab_config, ab_toggles, ab_seeds, ab_data, ab_out = "ablation";
  auto* ablate = app.add_subcommand("ablate", "Full model versus single-component ablations");
  ablate->add_option("--config", ab_config, "Base config file")->required();
  ablate->add_option("--toggles", ab_toggles, "Components to ablate: rsr,mt,mb,aug[,ssl]")->required();
  ablate->add_option("--seeds", ab_seeds, "Comma-separated seeds")->required();
  ablate->add_option("--data", ab_data, "Dataset directory")->required();
  ablate->add_option("--out", ab_out, "Output directory")->capture_default_str();
  ablate->callback([&] { action = [&] {
    const auto seeds = parse_list<std::uint64_t>(ab_seeds, "--seeds");
    ConfigHandle h;
    if ((exit_code = report(sn_config_load(ab_config.c_str(), &h.cfg))) != 0) return;
    exit_code = report(sn_ablate(h.cfg, ab_toggles.c_str(), seeds.data(), seeds.size(), ab_data.c_str(), ab_out.c_str()));
  }; });

  // plot -------------------------------------------------------------------
  std::string plot_in, plot_out;
  auto* plot = app.add_subcommand("plot", "Render a metrics CSV as SVG line charts");
  plot->add_option("--metrics", plot_in, "CSV file")->required();
  plot->add_option("--out", plot_out, "SVG file")->required();
  plot->callback([&] { action = [&] { exit_code = report(sn_plot(plot_in.c_str(), plot_out.c_str())); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }
  sn_set_num_threads(threads);
  if (!quiet) sn_set_log_callback(print_log, nullptr);
  try {
    if (action) action();
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }
  return exit_code;
}
