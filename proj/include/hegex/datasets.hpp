#pragma once

#include "hegex/graph.hpp"

#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace hegex {

enum class Task { NodeClassification, GraphClassification };

struct DatasetSpec {
  std::string name;
  Task task = Task::NodeClassification;
  std::string classified_type;  // node type carrying labels (or graph labels)
  int num_classes = 2;
  Metagraph metagraph;

  void validate() const;
};

// Training graphs grouped by node count.
struct SampledCorpus {
  std::map<int, std::vector<HeteroGraph>> buckets;
  std::pair<int, int> sizes{0, 0};  // inclusive
  int per_size = 0;

  int total() const;
};

// 5-node house: 4-node square plus a roof apex joined to two square
// corners, 6 edges. Labels: top=1, middle=2, bottom=3 when labeled.
HeteroGraph house_motif(const std::string& type = "node", bool labeled = false);
HeteroGraph cycle_motif(int len, const std::string& type = "node");
HeteroGraph grid_motif(int side, const std::string& type = "node");

// Barabasi-Albert base (one edge per new node) with house motifs, each
// attached to a uniformly random base node. Labels: base 0, house 1/2/3.
HeteroGraph gen_ba_shapes(int base_nodes, int num_motifs, std::mt19937_64& rng);

struct TreeMotif {
  enum class Kind { Cycle, Grid };
  Kind kind = Kind::Cycle;
  int param = 6;  // cycle length or grid side
};

// Balanced binary tree with `depth` edge levels plus motifs attached by
// one edge at random tree nodes. Labels: tree 0, motif 1.
HeteroGraph gen_tree_motif(int depth, TreeMotif motif, int num_motifs,
                           std::mt19937_64& rng);

// Small BA graphs, each with exactly one of house/cycle/grid attached.
// Graph label 0/1/2 by motif kind, class counts balanced within one.
std::vector<std::pair<HeteroGraph, int>> gen_ba3motif(int num_graphs,
                                                      std::mt19937_64& rng);

// Forest-fire subgraph sampler: burns outward from a random node of
// seed_type until exactly n nodes are on fire, restarting from a fresh
// seed when a wave dies early. Returns the induced subgraph.
HeteroGraph forest_fire_sample(const HeteroGraph& g, int n,
                               const std::string& seed_type, double p_burn,
                               std::mt19937_64& rng, int retry_budget = 1000);

// Node classification: forest-fire per_size subgraphs for every size.
SampledCorpus build_corpus(const HeteroGraph& g, std::pair<int, int> sizes,
                           int per_size, const std::string& seed_type,
                           std::mt19937_64& rng, double p_burn = 0.4);

// Graph classification: bucket existing graphs by node count.
SampledCorpus build_corpus(const std::vector<HeteroGraph>& graphs,
                           std::pair<int, int> sizes);

enum class SelectMethod { VarianceThreshold, TopKFrequency };

// Keeps the k best-scoring columns (variance, or count of entries away
// from the first alphabet value). Ties go to the lower column index and
// column order is preserved.
std::pair<FeatureMatrix, std::vector<int>> feature_select(
    const FeatureMatrix& m, SelectMethod method, int k);

}  // namespace hegex
