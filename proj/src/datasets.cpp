#include "hegex/datasets.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace hegex {

void DatasetSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("DatasetSpec: num_classes < 2");
  if (!metagraph.types.count(classified_type)) {
    throw std::invalid_argument("DatasetSpec: classified_type not in metagraph");
  }
}

int SampledCorpus::total() const {
  int t = 0;
  for (const auto& [n, bucket] : buckets) t += static_cast<int>(bucket.size());
  return t;
}

HeteroGraph house_motif(const std::string& type, bool labeled) {
  HeteroGraph h;
  for (NodeId v = 0; v < 5; ++v) h.add_node(v, type);
  // square 0-1-3-2-0, roof 2-4 and 3-4
  h.add_edge(0, 1);
  h.add_edge(0, 2);
  h.add_edge(1, 3);
  h.add_edge(2, 3);
  h.add_edge(2, 4);
  h.add_edge(3, 4);
  if (labeled) {
    h.class_labels = {{0, 3}, {1, 3}, {2, 2}, {3, 2}, {4, 1}};
  }
  return h;
}

HeteroGraph cycle_motif(int len, const std::string& type) {
  if (len < 3) throw std::invalid_argument("cycle_motif: len < 3");
  HeteroGraph h;
  for (NodeId v = 0; v < len; ++v) h.add_node(v, type);
  for (NodeId v = 0; v < len; ++v) h.add_edge(v, (v + 1) % len);
  return h;
}

HeteroGraph grid_motif(int side, const std::string& type) {
  if (side < 2) throw std::invalid_argument("grid_motif: side < 2");
  HeteroGraph h;
  for (NodeId v = 0; v < side * side; ++v) h.add_node(v, type);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const NodeId v = r * side + c;
      if (c + 1 < side) h.add_edge(v, v + 1);
      if (r + 1 < side) h.add_edge(v, v + side);
    }
  }
  return h;
}

namespace {

// Preferential attachment with one edge per new node, seeded from a
// single starting vertex.
HeteroGraph ba_graph(int n, std::mt19937_64& rng, const std::string& type) {
  if (n < 1) throw std::invalid_argument("ba_graph: n < 1");
  HeteroGraph g;
  g.add_node(0, type);
  std::vector<NodeId> endpoints;  // node repeated once per incident edge
  for (NodeId v = 1; v < n; ++v) {
    g.add_node(v, type);
    NodeId target = 0;
    if (!endpoints.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
      target = endpoints[pick(rng)];
    }
    g.add_edge(v, target);
    endpoints.push_back(v);
    endpoints.push_back(target);
  }
  return g;
}

// Appends motif nodes (fresh ids after the current maximum) and one
// attachment edge from a random existing anchor to the motif's node 0.
// Returns the ids given to the motif nodes.
std::vector<NodeId> attach_motif(HeteroGraph& g, const HeteroGraph& motif,
                                 const std::vector<NodeId>& anchors,
                                 std::mt19937_64& rng) {
  NodeId next = 0;
  for (const auto& [id, type] : g.nodes()) next = std::max(next, id + 1);
  std::vector<NodeId> ids;
  ids.reserve(motif.node_count());
  for (const auto& [id, type] : motif.nodes()) {
    g.add_node(next + id, type);
    ids.push_back(next + id);
  }
  for (const auto& [u, v] : motif.edges()) g.add_edge(next + u, next + v);
  std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
  g.add_edge(anchors[pick(rng)], ids.front());
  return ids;
}

}  // namespace

HeteroGraph gen_ba_shapes(int base_nodes, int num_motifs, std::mt19937_64& rng) {
  if (base_nodes < 5) throw std::invalid_argument("gen_ba_shapes: base_nodes < 5");
  HeteroGraph g = ba_graph(base_nodes, rng, "node");
  std::vector<NodeId> anchors;
  for (const auto& [id, type] : g.nodes()) {
    anchors.push_back(id);
    g.class_labels[id] = 0;
  }
  const HeteroGraph house = house_motif("node", true);
  for (int m = 0; m < num_motifs; ++m) {
    const std::vector<NodeId> ids = attach_motif(g, house, anchors, rng);
    for (const auto& [local, cls] : house.class_labels) {
      g.class_labels[ids[local]] = cls;
    }
  }
  return g;
}

HeteroGraph gen_tree_motif(int depth, TreeMotif motif, int num_motifs,
                           std::mt19937_64& rng) {
  if (depth < 2) throw std::invalid_argument("gen_tree_motif: depth < 2");
  HeteroGraph g;
  const int tree_nodes = (1 << (depth + 1)) - 1;
  for (NodeId v = 0; v < tree_nodes; ++v) {
    g.add_node(v, "node");
    g.class_labels[v] = 0;
  }
  for (NodeId v = 0; 2 * v + 2 < tree_nodes; ++v) {
    g.add_edge(v, 2 * v + 1);
    g.add_edge(v, 2 * v + 2);
  }
  std::vector<NodeId> anchors(tree_nodes);
  std::iota(anchors.begin(), anchors.end(), 0);
  const HeteroGraph shape = motif.kind == TreeMotif::Kind::Cycle
                                ? cycle_motif(motif.param)
                                : grid_motif(motif.param);
  for (int m = 0; m < num_motifs; ++m) {
    for (NodeId id : attach_motif(g, shape, anchors, rng)) {
      g.class_labels[id] = 1;
    }
  }
  return g;
}

std::vector<std::pair<HeteroGraph, int>> gen_ba3motif(int num_graphs,
                                                      std::mt19937_64& rng) {
  if (num_graphs < 1) throw std::invalid_argument("gen_ba3motif: num_graphs < 1");
  const HeteroGraph motifs[3] = {house_motif(), cycle_motif(6), grid_motif(3)};
  std::vector<std::pair<HeteroGraph, int>> out;
  out.reserve(num_graphs);
  for (int i = 0; i < num_graphs; ++i) {
    const int label = i % 3;
    HeteroGraph g = ba_graph(8, rng, "node");
    std::vector<NodeId> anchors;
    for (const auto& [id, type] : g.nodes()) anchors.push_back(id);
    attach_motif(g, motifs[label], anchors, rng);
    g.graph_label = label;
    out.emplace_back(std::move(g), label);
  }
  return out;
}

HeteroGraph forest_fire_sample(const HeteroGraph& g, int n,
                               const std::string& seed_type, double p_burn,
                               std::mt19937_64& rng, int retry_budget) {
  if (n < 1) throw std::invalid_argument("forest_fire_sample: n < 1");
  if (g.node_count() < static_cast<std::size_t>(n)) {
    throw std::invalid_argument("forest_fire_sample: graph smaller than n");
  }
  std::vector<NodeId> seeds;
  for (const auto& [id, type] : g.nodes()) {
    if (type == seed_type) seeds.push_back(id);
  }
  if (seeds.empty()) {
    throw std::invalid_argument("forest_fire_sample: no node of seed type " +
                                seed_type);
  }
  const CompactGraph c = compact(g);
  // numpy-style geometric: number of trials up to the first success.
  std::geometric_distribution<int> failures(1.0 - p_burn);

  for (int attempt = 0; attempt < retry_budget; ++attempt) {
    std::uniform_int_distribution<std::size_t> pick(0, seeds.size() - 1);
    const int seed = c.index.at(seeds[pick(rng)]);
    std::vector<char> burned(c.n(), 0);
    std::vector<int> order;  // burn order, also the BFS queue
    burned[seed] = 1;
    order.push_back(seed);
    std::size_t head = 0;
    while (order.size() < static_cast<std::size_t>(n) && head < order.size()) {
      const int v = order[head++];
      std::vector<int> fresh;
      for (int u : c.adj[v]) {
        if (!burned[u]) fresh.push_back(u);
      }
      if (fresh.empty()) continue;
      std::shuffle(fresh.begin(), fresh.end(), rng);
      std::size_t ignite = static_cast<std::size_t>(1 + failures(rng));
      ignite = std::min({ignite, fresh.size(),
                         static_cast<std::size_t>(n) - order.size()});
      for (std::size_t i = 0; i < ignite; ++i) {
        burned[fresh[i]] = 1;
        order.push_back(fresh[i]);
      }
    }
    if (order.size() == static_cast<std::size_t>(n)) {
      std::vector<NodeId> keep;
      keep.reserve(order.size());
      for (int v : order) keep.push_back(c.ids[v]);
      std::sort(keep.begin(), keep.end());
      return induced_subgraph(g, keep);
    }
  }
  throw std::runtime_error("forest_fire_sample: no " + std::to_string(n) +
                           "-node sample after " + std::to_string(retry_budget) +
                           " attempts");
}

SampledCorpus build_corpus(const HeteroGraph& g, std::pair<int, int> sizes,
                           int per_size, const std::string& seed_type,
                           std::mt19937_64& rng, double p_burn) {
  if (sizes.first > sizes.second) {
    throw std::invalid_argument("build_corpus: empty size range");
  }
  if (per_size < 1) throw std::invalid_argument("build_corpus: per_size < 1");
  SampledCorpus corpus;
  corpus.sizes = sizes;
  corpus.per_size = per_size;
  for (int n = sizes.first; n <= sizes.second; ++n) {
    auto& bucket = corpus.buckets[n];
    for (int i = 0; i < per_size; ++i) {
      bucket.push_back(forest_fire_sample(g, n, seed_type, p_burn, rng));
    }
  }
  return corpus;
}

SampledCorpus build_corpus(const std::vector<HeteroGraph>& graphs,
                           std::pair<int, int> sizes) {
  SampledCorpus corpus;
  corpus.sizes = sizes;
  for (const HeteroGraph& g : graphs) {
    const int n = static_cast<int>(g.node_count());
    if (n < sizes.first || n > sizes.second) continue;
    corpus.buckets[n].push_back(g);
  }
  for (const auto& [n, bucket] : corpus.buckets) {
    corpus.per_size = std::max(corpus.per_size, static_cast<int>(bucket.size()));
  }
  return corpus;
}

std::pair<FeatureMatrix, std::vector<int>> feature_select(
    const FeatureMatrix& m, SelectMethod method, int k) {
  const int d = m.width();
  if (k <= 0) throw std::invalid_argument("feature_select: k must be positive");
  if (k > d) throw std::invalid_argument("feature_select: k exceeds width");

  Eigen::VectorXd score(d);
  if (method == SelectMethod::VarianceThreshold) {
    for (int c = 0; c < d; ++c) {
      const auto col = m.rows.col(c);
      const double mean = col.mean();
      score[c] = (col.array() - mean).square().mean();
    }
  } else {
    const double rest = m.alphabet.empty() ? 0.0 : m.alphabet.front();
    for (int c = 0; c < d; ++c) {
      score[c] = (m.rows.col(c).array() != rest).count();
    }
  }

  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return score[a] > score[b]; });
  std::vector<int> kept(idx.begin(), idx.begin() + k);
  std::sort(kept.begin(), kept.end());

  FeatureMatrix out;
  out.kind = m.kind;
  out.alphabet = m.alphabet;
  out.rows.resize(m.rows.rows(), k);
  for (int c = 0; c < k; ++c) out.rows.col(c) = m.rows.col(kept[c]);
  return {std::move(out), std::move(kept)};
}

}  // namespace hegex
