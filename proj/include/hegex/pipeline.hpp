#pragma once

#include "hegex/datasets.hpp"
#include "hegex/evaluation.hpp"
#include "hegex/explainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace hegex {

// Everything a pipeline run needs: the dataset recipe, corpus shape,
// training hyperparameters, and run plumbing. CLI flags override the
// values loaded from a config file.
struct PipelineConfig {
  // dataset: tree-cycle | tree-grid | ba-shapes | ba-3motif | file
  std::string dataset = "tree-cycle";
  std::string dataset_path;       // dataset == "file"
  std::string task = "node";      // node | graph
  std::string classified_type = "node";
  int num_classes = 2;

  // synthetic builder knobs
  int tree_depth = 7;
  int motif_param = 6;   // cycle length or grid side
  int num_motifs = 20;
  int base_nodes = 300;  // ba-shapes base size
  int num_graphs = 120;  // ba-3motif corpus size

  // corpus shape
  int size_min = 10;
  int size_max = 15;
  int per_size = 256;
  int eval_per_size = 0;  // 0 -> per_size
  double p_burn = 0.4;

  GraphDiffusionConfig graph;
  DiscreteFeatureConfig feat_discrete;
  ContinuousFeatureConfig feat_continuous;
  HeteroGnnConfig gnn;

  // explanation + evaluation
  int candidate_per_size = 0;  // 0 -> per_size
  int max_motifs = 30;
  bool motifs_per_class = true;

  std::uint64_t seed = 0;
  int runs = 1;
  std::string out_dir = "out";
  bool force = false;  // not part of the config hash

  void validate() const;
};

nlohmann::ordered_json config_to_json(const PipelineConfig& c);
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::string& path);

// FNV-1a over the canonical config serialization (force excluded).
std::string config_hash(const PipelineConfig& c);

// Checkpoint round-trips. Loading rebuilds the model shell from the
// stored shape and overwrites its parameters.
nlohmann::ordered_json save_graph_denoiser(const GraphDenoiser& model);
std::shared_ptr<GraphDenoiser> load_graph_denoiser(const nlohmann::json& j);
nlohmann::ordered_json save_discrete_model(const DiscreteFeatureModel& model);
std::shared_ptr<DiscreteFeatureModel> load_discrete_model(const nlohmann::json& j);
nlohmann::ordered_json save_continuous_model(const ContinuousFeatureModel& model);
std::shared_ptr<ContinuousFeatureModel> load_continuous_model(const nlohmann::json& j);
nlohmann::ordered_json save_gnn(const HeteroGnn& model);
std::shared_ptr<HeteroGnn> load_gnn(const nlohmann::json& j);

nlohmann::ordered_json report_to_json(const ExplanationReport& report);
ExplanationReport report_from_json(const nlohmann::json& j);

struct StageResult {
  bool ran = false;  // false: manifest matched, outputs intact, stage skipped
  std::vector<std::string> outputs;
};

StageResult cmd_sample(const PipelineConfig& cfg);
StageResult cmd_train_graph(const PipelineConfig& cfg);
StageResult cmd_train_feat(const PipelineConfig& cfg);
StageResult cmd_train_gnn(const PipelineConfig& cfg);
StageResult cmd_explain(const PipelineConfig& cfg);
StageResult cmd_evaluate(const PipelineConfig& cfg);

}  // namespace hegex
