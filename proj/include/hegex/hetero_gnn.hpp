#pragma once

#include "hegex/datasets.hpp"
#include "hegex/nn.hpp"

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace hegex {

struct HeteroGnnConfig {
  int hidden = 32;
  int layers = 3;
  double lr = 0.005;
  double weight_decay = 1e-3;
  int max_epochs = 500;
  int patience = 100;
  double val_fraction = 0.2;
};

// Message passing with one linear map per (source type -> target type)
// relation, mean aggregation over each relation's neighbors, a per-type
// self weight, and ReLU between layers. Featured types are encoded from
// their feature rows; featureless types from a scaled-degree channel
// with a learnable per-type bias. Node heads read the classified type's
// state; graph heads read the mean-pooled state.
class HeteroGnn {
 public:
  HeteroGnn(const DatasetSpec& spec, const std::map<std::string, int>& widths,
            HeteroGnnConfig cfg, std::mt19937_64& rng);

  Eigen::VectorXd predict_node(const HeteroGraph& g, NodeId id);
  Eigen::VectorXd predict_graph(const HeteroGraph& g);

  // Training plumbing: per-node states in CompactGraph order, with the
  // caches backward_states needs to push gradients into the parameters.
  Eigen::MatrixXd forward_states(const HeteroGraph& g);
  void backward_states(const Eigen::MatrixXd& g_states);

  std::vector<ParamRef> parameters();
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);

  Linear& head() { return *head_; }
  const DatasetSpec& spec() const { return spec_; }
  const HeteroGnnConfig& config() const { return cfg_; }
  const std::map<std::string, int>& feature_widths() const { return widths_; }

 private:
  struct LayerParams {
    std::map<std::string, Linear> self;       // by node type
    std::map<std::string, Linear> relation;   // by "src>dst"
  };

  DatasetSpec spec_;
  HeteroGnnConfig cfg_;
  std::map<std::string, int> widths_;
  // Parameter holders live in node-stable or heap storage so the refs in
  // params_ survive moves of the model object.
  std::map<std::string, Linear> encoders_;
  std::vector<LayerParams> layers_;
  std::unique_ptr<Linear> head_;
  std::vector<ParamRef> params_;

  // caches from the last forward_states call
  struct Cache {
    CompactGraph c;
    std::map<std::string, std::vector<int>> rows_by_type;
    std::map<std::string, std::vector<std::vector<int>>> rel_neighbors;
    std::vector<Eigen::MatrixXd> h;  // layer inputs, h[0..layers]
    std::vector<Eigen::MatrixXd> z;  // pre-activation per layer
  } cache_;

  void build_cache(const HeteroGraph& g);
};

struct GnnTrainResult {
  std::vector<double> val_history;
  double best_score = 0.0;
  int best_epoch = -1;
};

HeteroGnn train_gnn(const std::vector<HeteroGraph>& graphs,
                    const DatasetSpec& spec, const HeteroGnnConfig& cfg,
                    std::mt19937_64& rng, GnnTrainResult* result = nullptr);

}  // namespace hegex
