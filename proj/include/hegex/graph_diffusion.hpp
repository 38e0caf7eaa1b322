#pragma once

#include "hegex/attention.hpp"
#include "hegex/graph.hpp"
#include "hegex/schedule.hpp"

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace hegex {

// Categorical graph state: per-node type indices plus a symmetric 0/1
// adjacency with an empty diagonal.
struct GraphState {
  std::vector<int> node_types;
  Eigen::MatrixXi adj;

  int n() const { return static_cast<int>(node_types.size()); }
};

// Empirical categorical priors for a fixed-size training bucket.
struct TransitionModel {
  Eigen::VectorXd m_node;  // over the shared type order
  Eigen::VectorXd m_edge;  // {no-edge, edge}
};

GraphState encode_graph(const HeteroGraph& g,
                        const std::vector<std::string>& type_names);
HeteroGraph decode_state(const GraphState& s,
                         const std::vector<std::string>& type_names);

TransitionModel estimate_transition_model(
    const std::vector<HeteroGraph>& bucket,
    const std::vector<std::string>& type_names);

// Resamples every node type and node pair through the cumulative
// transition at step t (t = 0 returns the input unchanged).
GraphState forward_noise_graph(const GraphState& g0, int t,
                               const NoiseSchedule& schedule,
                               const TransitionModel& tm,
                               std::mt19937_64& rng);

// Cycle participation counts (3/4/5), the three smallest nonzero
// normalized-Laplacian eigenvalues broadcast to every node (zero-padded),
// and the node degree. 7 columns.
Eigen::MatrixXd augment_extra_features(const HeteroGraph& g);

struct GraphDiffusionConfig {
  int T = 500;
  int hidden = 64;
  int pair_hidden = 32;
  int heads = 4;
  int layers = 2;
  int time_dim = 16;
  double lambda_edges = 5.0;
  double lr = 2e-4;
  double weight_decay = 1e-12;
  int steps = 3000;
};

// Graph-transformer denoiser for graphs of one fixed size.
class GraphDenoiser {
 public:
  GraphDenoiser(int n, std::vector<std::string> type_names,
                GraphDiffusionConfig cfg, std::mt19937_64& rng);

  // Node logits (n x K) and symmetrized pair logits (n^2 x 2).
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> forward(const GraphState& state,
                                                      int t);
  void backward(const Eigen::MatrixXd& g_node, const Eigen::MatrixXd& g_edge);

  std::vector<ParamRef> parameters();
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);

  int n() const { return n_; }
  const std::vector<std::string>& type_names() const { return type_names_; }
  const GraphDiffusionConfig& config() const { return cfg_; }

  TransitionModel transition;
  NoiseSchedule schedule;
  double final_loss = 0.0;

 private:
  int n_ = 0;
  std::vector<std::string> type_names_;
  GraphDiffusionConfig cfg_;
  Linear in_x_, in_e_, head_x_, head_e_;
  std::vector<std::unique_ptr<GraphTransformerLayer>> layers_;
  std::vector<ParamRef> params_;
};

// One optimization step per iteration: draw a bucket graph and a step t,
// noise it, and fit the clean node and edge distributions under
// cross-entropy with the edge term weighted by lambda.
GraphDenoiser train_graph_denoiser(const std::vector<HeteroGraph>& bucket,
                                   const std::vector<std::string>& type_names,
                                   const GraphDiffusionConfig& cfg,
                                   std::mt19937_64& rng,
                                   std::vector<double>* loss_history = nullptr);

std::vector<HeteroGraph> sample_graphs(GraphDenoiser& model, int count,
                                       std::mt19937_64& rng);

// One trained denoiser per graph size.
struct ModelBank {
  std::map<int, std::shared_ptr<GraphDenoiser>> models;
};

}  // namespace hegex
