// SPDX-License-Identifier: Apache-2.0
//
// mmsl — multi-mode image augmentation toolkit.
//
//   mmsl augment        transform a directory of images
//   mmsl synth-extreme  build a simulated extreme-capture gallery
//   mmsl eval           CMC / mAP from embedding files
//   mmsl preview        annotated before/after panel for one image

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmsl/mmsl.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct ConfigFlags {
  std::string config_path;
  double pg = -1.0;
  double pt = -1.0;
  int rows = 0;
  int cols = 0;
  int cells = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--pg", flags.pg, "global-branch probability")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--pt", flags.pt, "cumulative local threshold")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--rows", flags.rows, "grid rows")->check(CLI::PositiveNumber);
  cmd->add_option("--cols", flags.cols, "grid columns")->check(CLI::PositiveNumber);
  cmd->add_option("--cells", flags.cells, "cells transformed per grid image")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", flags.seed, "run seed")->each([&flags](const std::string&) {
    flags.seed_set = true;
  });
}

mmsl::MmslConfig resolve_config(const ConfigFlags& flags) {
  mmsl::MmslConfig cfg;
  bool explicit_cells = flags.cells > 0;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw mmsl::IoError(flags.config_path + ": cannot open config");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw mmsl::InvalidConfig(flags.config_path + ": " + e.what());
    }
    cfg = mmsl::config_from_json(j);
    // config_from_json already applied the one-third default when n was absent
    explicit_cells = explicit_cells || j.contains("patch_count");
  }
  if (flags.pg >= 0.0) cfg.global_prob = flags.pg;
  if (flags.pt >= 0.0) cfg.total_prob = flags.pt;
  if (flags.rows > 0) cfg.rows = flags.rows;
  if (flags.cols > 0) cfg.cols = flags.cols;
  if (flags.cells > 0) cfg.patch_count = flags.cells;
  if (!explicit_cells) {
    cfg.patch_count = mmsl::MmslConfig::default_patch_count(cfg.rows, cfg.cols);
  }
  if (flags.seed_set) cfg.seed = flags.seed;
  cfg.validate();
  return cfg;
}

void print_json(const nlohmann::json& j, bool pretty) {
  if (pretty) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << j.dump() << '\n';
  }
}

int run_augment(const std::string& in_dir, const std::string& out_dir,
                const ConfigFlags& flags, bool pretty) {
  const mmsl::MmslConfig cfg = resolve_config(flags);
  if (mmsl::list_images(in_dir).empty()) {
    std::cerr << "mmsl: no images found in " << in_dir << '\n';
    return kExitData;
  }
  std::vector<std::string> warnings;
  const mmsl::AugmentStats stats =
      mmsl::augment_directory(in_dir, out_dir, cfg, mmsl::env_threads(), &warnings);
  for (const std::string& w : warnings) std::cerr << "mmsl: warning: skipped " << w << '\n';

  const nlohmann::json summary = mmsl::augment_summary_json(stats, cfg);
  if (pretty) {
    std::cout << "augmented " << (stats.images - stats.failed) << "/" << stats.images
              << " images into " << out_dir << '\n'
              << "branches: global=" << stats.global_branch
              << " local=" << stats.local_branch
              << " identity=" << stats.identity_branch << '\n'
              << "config: " << summary.at("config").dump() << '\n';
  } else {
    print_json(summary, false);
  }
  if (stats.images > 0 && stats.failed == stats.images) {
    std::cerr << "mmsl: every input failed to decode\n";
    return kExitData;
  }
  return kExitOk;
}

int run_synth_extreme(const std::string& in_dir, const std::string& out_dir,
                      std::uint64_t seed, bool pretty) {
  const std::vector<mmsl::ReidItem> gallery = mmsl::scan_dir_items(in_dir);
  if (gallery.empty()) {
    std::cerr << "mmsl: no gallery images found in " << in_dir << '\n';
    return kExitData;
  }
  const nlohmann::json manifest =
      mmsl::synth_extreme(gallery, out_dir, seed, mmsl::env_threads());

  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw mmsl::IoError(manifest_path.string() + ": cannot open for writing");
  out << manifest.dump(2) << '\n';
  if (!out) throw mmsl::IoError(manifest_path.string() + ": write failed");

  print_json(nlohmann::json{{"images", gallery.size()},
                            {"manifest", manifest_path.string()},
                            {"seed", seed}},
             pretty);
  return kExitOk;
}

std::vector<int> parse_ranks(const std::string& spec) {
  std::vector<int> ranks;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    try {
      std::size_t used = 0;
      const int r = std::stoi(token, &used);
      if (used != token.size() || r < 1) throw std::invalid_argument(token);
      ranks.push_back(r);
    } catch (const std::exception&) {
      throw mmsl::FormatError("bad rank list \"" + spec + "\"");
    }
  }
  if (ranks.empty()) throw mmsl::FormatError("rank list is empty");
  return ranks;
}

int run_eval(const std::string& query_vectors, const std::string& query_labels,
             const std::string& gallery_vectors, const std::string& gallery_labels,
             const std::string& metric_name, const std::string& ranks_spec,
             bool pretty) {
  std::vector<int> ranks;
  try {
    ranks = parse_ranks(ranks_spec);
  } catch (const mmsl::FormatError& e) {
    std::cerr << "mmsl: " << e.what() << '\n';
    return kExitUsage;
  }
  const mmsl::Metric metric =
      metric_name == "cosine" ? mmsl::Metric::Cosine : mmsl::Metric::Euclidean;

  const mmsl::EmbeddingSet query = mmsl::load_embeddings(query_vectors, query_labels);
  const mmsl::EmbeddingSet gallery =
      mmsl::load_embeddings(gallery_vectors, gallery_labels);
  const mmsl::DistanceMatrix dist = mmsl::pairwise_distances(query, gallery, metric);
  const int max_rank = *std::max_element(ranks.begin(), ranks.end());
  const mmsl::EvalResult result =
      mmsl::evaluate(dist, mmsl::labels_of(query), mmsl::labels_of(gallery), max_rank);

  print_json(mmsl::eval_result_to_json(result, ranks), pretty);
  return kExitOk;
}

int run_preview(const std::string& in_path, const std::string& out_path,
                const ConfigFlags& flags, bool pretty) {
  const mmsl::MmslConfig cfg = resolve_config(flags);
  const mmsl::Image input = mmsl::load_image(in_path);
  mmsl::RandomStream rng = mmsl::substream(cfg.seed, 0);
  const auto sample =
      mmsl::mmsl_transform(input, fs::path(in_path).stem().string(), cfg, rng);

  mmsl::save_image(sample.image, out_path);
  const fs::path out(out_path);
  const fs::path panel_path = out.parent_path() / (out.stem().string() + ".panel.png");
  mmsl::save_image(mmsl::render_preview_panel(input, sample.image, sample.log, cfg),
                   panel_path.string());

  nlohmann::json log = nlohmann::json::array();
  for (const auto& entry : sample.log) log.push_back(mmsl::to_json(entry));
  print_json(nlohmann::json{{"image", out_path},
                            {"panel", panel_path.string()},
                            {"log", log},
                            {"config", mmsl::config_to_json(cfg)}},
             pretty);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-mode image augmentation and re-id evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --pretty appear after the subcommand too
  bool pretty = false;
  app.add_flag("--pretty", pretty, "human-readable output instead of JSON");

  std::string in_dir, out_dir;
  ConfigFlags aug_flags;
  CLI::App* augment = app.add_subcommand("augment", "transform a directory of images");
  augment->add_option("--in", in_dir, "input directory")->required();
  augment->add_option("--out", out_dir, "output directory")->required();
  add_config_flags(augment, aug_flags);

  std::string synth_in, synth_out;
  std::uint64_t synth_seed = 0;
  CLI::App* synth =
      app.add_subcommand("synth-extreme", "one random op per gallery image");
  synth->add_option("--in", synth_in, "gallery directory")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "run seed");

  std::string query_vectors, query_labels, gallery_vectors, gallery_labels;
  std::string metric = "euclidean";
  std::string ranks = "1,5,10";
  CLI::App* eval = app.add_subcommand("eval", "CMC and mAP from embedding files");
  eval->add_option("--query-emb", query_vectors, "query EMB1 vector file")->required();
  eval->add_option("--query-labels", query_labels, "query labels CSV")->required();
  eval->add_option("--gallery-emb", gallery_vectors, "gallery EMB1 vector file")
      ->required();
  eval->add_option("--gallery-labels", gallery_labels, "gallery labels CSV")
      ->required();
  eval->add_option("--metric", metric, "distance metric")
      ->required()
      ->check(CLI::IsMember({"euclidean", "cosine"}));
  eval->add_option("--ranks", ranks, "comma-separated CMC ranks (default 1,5,10)");

  std::string preview_in, preview_out;
  ConfigFlags preview_flags;
  CLI::App* preview = app.add_subcommand("preview", "annotated before/after panel");
  preview->add_option("--in", preview_in, "input image")->required();
  preview->add_option("--out", preview_out, "output PNG path")->required();
  add_config_flags(preview, preview_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (augment->parsed()) return run_augment(in_dir, out_dir, aug_flags, pretty);
    if (synth->parsed()) return run_synth_extreme(synth_in, synth_out, synth_seed, pretty);
    if (eval->parsed()) {
      return run_eval(query_vectors, query_labels, gallery_vectors, gallery_labels,
                      metric, ranks, pretty);
    }
    if (preview->parsed()) {
      return run_preview(preview_in, preview_out, preview_flags, pretty);
    }
  } catch (const mmsl::Error& e) {
    std::cerr << "mmsl: error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "mmsl: error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
