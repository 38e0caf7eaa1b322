#include "hegex/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <string>

namespace {

struct CliOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  int runs = 0;
  bool force = false;
};

hegex::PipelineConfig resolve_config(const CliOptions& opts) {
  hegex::PipelineConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = hegex::load_pipeline_config(opts.config_path);
  }
  if (opts.seed_set) cfg.seed = opts.seed;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.runs > 0) cfg.runs = opts.runs;
  cfg.force = opts.force;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous graph explanation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  CliOptions opts;
  app.add_option("--config", opts.config_path, "Pipeline config file (JSON)");
  auto* seed_opt = app.add_option("--seed", opts.seed, "Base random seed");
  app.add_option("--out", opts.out_dir, "Output directory");
  app.add_option("--runs", opts.runs, "Generation repetitions for explain/evaluate");
  app.add_flag("--force", opts.force, "Rerun stages even when manifests match");

  const std::map<std::string,
                 std::pair<std::string,
                           std::function<hegex::StageResult(
                               const hegex::PipelineConfig&)>>>
      stages{
          {"sample",
           {"Build the training and held-out corpora", hegex::cmd_sample}},
          {"train-graph",
           {"Train the per-size graph denoisers", hegex::cmd_train_graph}},
          {"train-feat",
           {"Train the node feature generators", hegex::cmd_train_feat}},
          {"train-gnn", {"Train the classifier", hegex::cmd_train_gnn}},
          {"explain",
           {"Generate candidates and select explanations", hegex::cmd_explain}},
          {"evaluate",
           {"Score explanations against held-out samples", hegex::cmd_evaluate}}};

  for (const auto& [name, stage] : stages) {
    app.add_subcommand(name, stage.first);
  }

  CLI11_PARSE(app, argc, argv);
  opts.seed_set = seed_opt->count() > 0;

  const std::string stage_name = app.get_subcommands().front()->get_name();
  try {
    const hegex::PipelineConfig cfg = resolve_config(opts);
    const hegex::StageResult result = stages.at(stage_name).second(cfg);
    if (result.ran) {
      std::cout << stage_name << ": wrote";
      for (const std::string& o : result.outputs) std::cout << " " << o;
      std::cout << "\n";
    } else {
      std::cout << stage_name << ": up to date, nothing to do\n";
    }
  } catch (const std::exception& e) {
    std::cerr << stage_name << " failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
