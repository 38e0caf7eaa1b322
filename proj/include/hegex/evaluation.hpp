#pragma once

#include "hegex/datasets.hpp"
#include "hegex/explainer.hpp"
#include "hegex/graph.hpp"

#include <map>
#include <string>
#include <vector>

namespace hegex {

enum class GraphStatistic { Degree, Clustering, Spectrum, NodeTypeDistribution };

// Kernel MMD setup. Degree and node-type histograms bin by exact value;
// clustering and spectrum use `bins` uniform cells over [range_min,
// range_max].
struct MmdConfig {
  GraphStatistic statistic = GraphStatistic::Degree;
  double sigma = 1.0;
  int bins = 100;
  double range_min = 0.0;
  double range_max = 1.0;

  static MmdConfig for_statistic(GraphStatistic s);
  void validate() const;
};

// Squared MMD between the per-graph statistic histograms of two corpora,
// with a Gaussian kernel over total-variation distance. Biased
// (V-statistic) estimate, clamped at zero.
double mmd(const std::vector<HeteroGraph>& set_a,
           const std::vector<HeteroGraph>& set_b, const MmdConfig& cfg);

double ntd_mmd(const std::vector<HeteroGraph>& generated,
               const std::vector<HeteroGraph>& real, double sigma = 1.0);

// Mean cosine similarity over all row pairs; rows of zero norm contribute
// zero.
double feature_cosine(const FeatureMatrix& gen, const FeatureMatrix& train);

// Mean over classes of the selected explanation's own class probability.
double predictive_faithfulness(const ExplanationReport& report);

// Ground-truth explanation motifs, either per class or one shared pool.
// Classes listed in fallback_classes had no class-pure sample and are
// served by the shared pool.
struct MotifSet {
  std::map<int, std::vector<HeteroGraph>> per_class;
  std::vector<HeteroGraph> shared;
  std::vector<int> fallback_classes;

  const std::vector<HeteroGraph>& for_class(int c) const;
};

// Mean over classes of the fraction of that class's motifs contained in
// the selected explanation graph.
double ground_truth_faithfulness(const ExplanationReport& report,
                                 const MotifSet& motifs);

struct LouvainResult {
  std::vector<std::vector<NodeId>> communities;  // ids ascending, largest first
  std::vector<double> modularity_history;        // after each local-moving pass
  double modularity = 0.0;
};

// Modularity maximization by local moving plus graph aggregation,
// resolution 1, deterministic through sorted-id node order. Requires at
// least one edge.
LouvainResult louvain_communities(const HeteroGraph& g);

// Builds motifs from real samples: per graph, the induced subgraph of its
// largest Louvain community, kept when connected with >= 3 nodes. In
// per-class mode only samples whose classified-type nodes all share one
// class contribute, filed under that class; classes left empty fall back
// to the pooled collection.
MotifSet extract_motifs(const std::vector<HeteroGraph>& samples,
                        const DatasetSpec& spec, bool per_class,
                        int max_motifs = 30);

}  // namespace hegex
