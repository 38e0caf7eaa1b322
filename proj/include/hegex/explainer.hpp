#pragma once

#include "hegex/feature_diffusion.hpp"
#include "hegex/graph_diffusion.hpp"
#include "hegex/hetero_gnn.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace hegex {

// A feature generator trained for one plan entry. Exactly one of the two
// model pointers is set, matching entry.kind.
struct TrainedGenerator {
  GeneratorEntry entry;
  std::shared_ptr<DiscreteFeatureModel> discrete;
  std::shared_ptr<ContinuousFeatureModel> continuous;
};

struct FeatureModelSet {
  std::vector<TrainedGenerator> generators;
};

struct Candidate {
  HeteroGraph graph;
  int size = 0;
  std::uint64_t seed = 0;  // reseeding with this reproduces the candidate
};

// Survivors of the connectivity and metagraph filters, with the funnel
// counts needed for validity reporting.
struct CandidateSet {
  std::vector<Candidate> items;
  std::map<int, int> per_size;  // valid candidates per graph size
  int generated = 0;
  int connected = 0;
  int valid = 0;
};

struct ClassExplanation {
  int class_index = 0;
  HeteroGraph graph;
  int candidate_index = -1;
  NodeId node = -1;       // winning node, node-level tasks only
  Eigen::VectorXd probs;  // softmax at the winning node or graph
};

struct ExplanationReport {
  std::vector<ClassExplanation> classes;
  int generated = 0;
  int connected = 0;
  int valid = 0;
  std::map<std::string, double> metrics;
};

// Samples per_size graphs from every model in the bank, attaches one
// fresh feature row per featured node, then keeps connected graphs whose
// type edges all appear in the metagraph. The classified type's rows come
// from one uniformly chosen class generator per graph.
CandidateSet generate_candidates(ModelBank& bank, FeatureModelSet& features,
                                 int per_size, const Metagraph& metagraph,
                                 std::mt19937_64& rng);

// Per class, the candidate (and node of the classified type) whose
// softmax probability for that class is highest. Ties go to the lower
// candidate index, then the lower node id.
ExplanationReport select_node_explanations(const CandidateSet& candidates,
                                           HeteroGnn& model);

ExplanationReport select_graph_explanations(const CandidateSet& candidates,
                                            HeteroGnn& model);

struct ScoredCandidate {
  int candidate_index = -1;
  NodeId node = -1;
  double prob = 0.0;
};

// Per class, the k best-scoring distinct candidates in non-increasing
// probability order (fewer when the set is smaller than k).
std::vector<std::vector<ScoredCandidate>> top_k_explanations(
    const CandidateSet& candidates, HeteroGnn& model, int k);

}  // namespace hegex
