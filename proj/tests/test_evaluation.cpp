#include "hegex/evaluation.hpp"

#include "hegex/datasets.hpp"
#include "hegex/graph_stats.hpp"
#include "hegex/subgraph_iso.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace hegex;

namespace {

DatasetSpec node_spec(int classes) {
  DatasetSpec spec;
  spec.name = "nodes";
  spec.task = Task::NodeClassification;
  spec.classified_type = "node";
  spec.num_classes = classes;
  spec.metagraph.types = {"node"};
  spec.metagraph.add_type_edge("node", "node");
  return spec;
}

HeteroGraph clique(int n, NodeId offset = 0) {
  HeteroGraph g;
  for (int v = 0; v < n; ++v) g.add_node(offset + v, "node");
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) g.add_edge(offset + u, offset + v);
  }
  return g;
}

HeteroGraph path(int n) {
  HeteroGraph g;
  for (int v = 0; v < n; ++v) {
    g.add_node(v, "node");
    if (v > 0) g.add_edge(v - 1, v);
  }
  return g;
}

HeteroGraph edge_pair(const std::string& type) {
  HeteroGraph g;
  g.add_node(0, type);
  g.add_node(1, type);
  g.add_edge(0, 1);
  return g;
}

HeteroGraph labeled(HeteroGraph g, int cls) {
  for (const auto& [id, type] : g.nodes()) g.class_labels[id] = cls;
  return g;
}

// Two 4-cliques {0..3} and {4..7} joined by the single bridge 3-4.
HeteroGraph two_cliques_bridged() {
  HeteroGraph g = clique(4, 0);
  const HeteroGraph right = clique(4, 4);
  for (const auto& [id, type] : right.nodes()) g.add_node(id, type);
  for (const auto& [u, v] : right.edges()) g.add_edge(u, v);
  g.add_edge(3, 4);
  return g;
}

HeteroGraph random_connected(int n, std::mt19937_64& rng) {
  HeteroGraph g;
  g.add_node(0, "node");
  for (int v = 1; v < n; ++v) {
    g.add_node(v, "node");
    std::uniform_int_distribution<int> anchor(0, v - 1);
    g.add_edge(anchor(rng), v);
  }
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int extra = 0; extra < n / 2; ++extra) {
    const int u = pick(rng);
    const int v = pick(rng);
    if (u != v && !g.has_edge(u, v)) g.add_edge(u, v);
  }
  return g;
}

ClassExplanation make_class(int cls, HeteroGraph graph, Eigen::VectorXd probs) {
  ClassExplanation e;
  e.class_index = cls;
  e.graph = std::move(graph);
  e.probs = std::move(probs);
  return e;
}

}  // namespace

TEST_CASE("statistic presets and config validation") {
  const MmdConfig cl = MmdConfig::for_statistic(GraphStatistic::Clustering);
  CHECK_EQ(cl.statistic, GraphStatistic::Clustering);
  CHECK_EQ(cl.bins, 100);
  CHECK_EQ(cl.range_min, 0.0);
  CHECK_EQ(cl.range_max, 1.0);

  const MmdConfig sp = MmdConfig::for_statistic(GraphStatistic::Spectrum);
  CHECK_EQ(sp.bins, 200);
  CHECK_EQ(sp.range_min, 0.0);
  CHECK_EQ(sp.range_max, 2.0);

  CHECK_EQ(MmdConfig::for_statistic(GraphStatistic::Degree).bins, 1);
  CHECK_EQ(MmdConfig::for_statistic(GraphStatistic::NodeTypeDistribution).bins, 1);

  MmdConfig bad = MmdConfig::for_statistic(GraphStatistic::Degree);
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.sigma = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  MmdConfig zero_bins = MmdConfig::for_statistic(GraphStatistic::Clustering);
  zero_bins.bins = 0;
  CHECK_THROWS_AS(zero_bins.validate(), std::invalid_argument);

  MmdConfig flat = MmdConfig::for_statistic(GraphStatistic::Spectrum);
  flat.range_max = flat.range_min;
  CHECK_THROWS_AS(flat.validate(), std::invalid_argument);

  // Exact-value statistics ignore the range entirely.
  MmdConfig degenerate_range = MmdConfig::for_statistic(GraphStatistic::Degree);
  degenerate_range.range_max = degenerate_range.range_min;
  CHECK_NOTHROW(degenerate_range.validate());
}

TEST_CASE("degree mmd matches the hand-computed two-graph value") {
  const MmdConfig cfg = MmdConfig::for_statistic(GraphStatistic::Degree);
  const std::vector<HeteroGraph> pair = {clique(2)};
  const std::vector<HeteroGraph> tri = {clique(3)};

  // Degree histograms (0,1,0) vs (0,0,1): tv distance 1, so the squared
  // mmd is 2*(1 - exp(-1/2)).
  const double value = mmd(pair, tri, cfg);
  CHECK_EQ(value, doctest::Approx(0.7869386805747332).epsilon(1e-12));
  CHECK_EQ(mmd(tri, pair, cfg), doctest::Approx(value).epsilon(1e-14));

  // Duplicating members leaves the histogram means unchanged.
  const std::vector<HeteroGraph> pair2 = {clique(2), clique(2)};
  const std::vector<HeteroGraph> tri2 = {clique(3), clique(3)};
  CHECK_EQ(mmd(pair2, tri2, cfg), doctest::Approx(value).epsilon(1e-12));

  CHECK_EQ(mmd(pair, pair, cfg), 0.0);
  CHECK_EQ(mmd(tri2, tri2, cfg), 0.0);
}

TEST_CASE("mmd is symmetric, nonnegative, and rejects empty input") {
  std::mt19937_64 rng(517);
  const MmdConfig cfg = MmdConfig::for_statistic(GraphStatistic::Degree);
  std::uniform_int_distribution<int> size(2, 8);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<HeteroGraph> a;
    std::vector<HeteroGraph> b;
    for (int i = 0; i < 3; ++i) a.push_back(random_connected(size(rng), rng));
    for (int i = 0; i < 4; ++i) b.push_back(random_connected(size(rng), rng));
    const double ab = mmd(a, b, cfg);
    const double ba = mmd(b, a, cfg);
    CHECK(ab >= 0.0);
    CHECK_EQ(ab, doctest::Approx(ba).epsilon(1e-12));
    CHECK_EQ(mmd(a, a, cfg), 0.0);
  }

  const std::vector<HeteroGraph> some = {clique(3)};
  CHECK_THROWS_AS(mmd({}, some, cfg), std::invalid_argument);
  CHECK_THROWS_AS(mmd(some, {}, cfg), std::invalid_argument);
  const std::vector<HeteroGraph> with_empty = {clique(3), HeteroGraph{}};
  CHECK_THROWS_AS(mmd(with_empty, some, cfg), std::invalid_argument);
}

TEST_CASE("clustering and spectrum histograms separate cliques from paths") {
  const std::vector<HeteroGraph> tri = {clique(3)};
  const std::vector<HeteroGraph> p3 = {path(3)};
  const std::vector<HeteroGraph> p2 = {clique(2)};

  // All clustering mass lands in the top bin for a triangle and the bottom
  // bin for a path, so the value matches the tv=1 closed form.
  const MmdConfig cl = MmdConfig::for_statistic(GraphStatistic::Clustering);
  CHECK_EQ(mmd(tri, p3, cl), doctest::Approx(0.7869386805747332).epsilon(1e-12));
  CHECK_EQ(mmd(tri, tri, cl), 0.0);

  // Triangle spectrum {0, 1.5, 1.5} vs single-edge spectrum {0, 2}:
  // tv = 2/3, value 2*(1 - exp(-(2/3)^2 / 2)).
  const MmdConfig sp = MmdConfig::for_statistic(GraphStatistic::Spectrum);
  CHECK_EQ(mmd(tri, p2, sp), doctest::Approx(0.3985251941663839).epsilon(1e-12));
  CHECK_EQ(mmd(p2, p2, sp), 0.0);
}

TEST_CASE("node type distribution mmd keys on the shared type support") {
  const std::vector<HeteroGraph> gen = {clique(3), path(4)};
  const std::vector<HeteroGraph> real = {path(2)};
  CHECK_EQ(ntd_mmd(gen, real), 0.0);

  const std::vector<HeteroGraph> all_a = {edge_pair("a")};
  const std::vector<HeteroGraph> all_b = {edge_pair("b")};
  CHECK_EQ(ntd_mmd(all_a, all_b),
           doctest::Approx(0.7869386805747332).epsilon(1e-12));
  CHECK_EQ(ntd_mmd(all_a, all_b, 0.5),
           doctest::Approx(1.7293294335267746).epsilon(1e-12));
  CHECK_EQ(ntd_mmd(all_a, all_a), 0.0);
}

TEST_CASE("feature cosine averages row-pair similarities") {
  FeatureMatrix gen;
  gen.rows.resize(1, 2);
  gen.rows << 1.0, 0.0;
  FeatureMatrix train;
  train.rows.resize(1, 2);
  train.rows << 1.0, 0.0;
  CHECK_EQ(feature_cosine(gen, train), 1.0);

  train.rows << 0.0, 1.0;
  CHECK_EQ(feature_cosine(gen, train), 0.0);

  gen.rows << 1.0, 1.0;
  train.rows << 1.0, 0.0;
  CHECK_EQ(feature_cosine(gen, train),
           doctest::Approx(0.7071067811865476).epsilon(1e-12));

  // A zero-norm row contributes nothing while still counting in the mean.
  FeatureMatrix padded;
  padded.rows = Eigen::MatrixXd::Zero(2, 2);
  padded.rows(0, 0) = 1.0;
  FeatureMatrix unit;
  unit.rows.resize(1, 2);
  unit.rows << 1.0, 0.0;
  CHECK_EQ(feature_cosine(padded, unit), 0.5);

  FeatureMatrix wide;
  wide.rows = Eigen::MatrixXd::Ones(1, 3);
  CHECK_THROWS_AS(feature_cosine(gen, wide), std::invalid_argument);
  FeatureMatrix empty;
  empty.rows.resize(0, 2);
  CHECK_THROWS_AS(feature_cosine(empty, unit), std::invalid_argument);
}

TEST_CASE("predictive faithfulness averages the winning class probability") {
  ExplanationReport report;
  report.classes.push_back(
      make_class(0, clique(3), (Eigen::VectorXd(2) << 0.9, 0.1).finished()));
  report.classes.push_back(
      make_class(1, clique(3), (Eigen::VectorXd(2) << 0.5, 0.5).finished()));
  CHECK_EQ(predictive_faithfulness(report),
           doctest::Approx(0.7).epsilon(1e-12));

  ExplanationReport uniform;
  uniform.classes.push_back(
      make_class(0, path(2), Eigen::VectorXd::Constant(3, 1.0 / 3.0)));
  CHECK_EQ(predictive_faithfulness(uniform),
           doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(predictive_faithfulness(ExplanationReport{}),
                  std::invalid_argument);
  ExplanationReport malformed;
  malformed.classes.push_back(
      make_class(2, path(2), (Eigen::VectorXd(2) << 0.5, 0.5).finished()));
  CHECK_THROWS_AS(predictive_faithfulness(malformed), std::invalid_argument);
  malformed.classes.front().class_index = -1;
  CHECK_THROWS_AS(predictive_faithfulness(malformed), std::invalid_argument);
}

TEST_CASE("ground truth faithfulness scores motif containment per class") {
  const Eigen::VectorXd p = (Eigen::VectorXd(2) << 0.5, 0.5).finished();

  ExplanationReport report;
  report.classes.push_back(make_class(0, clique(3), p));
  MotifSet contained;
  contained.per_class[0] = {clique(3)};
  CHECK_EQ(ground_truth_faithfulness(report, contained), 1.0);

  MotifSet missing;
  missing.per_class[0] = {clique(4)};
  CHECK_EQ(ground_truth_faithfulness(report, missing), 0.0);

  ExplanationReport two;
  two.classes.push_back(make_class(0, clique(3), p));
  two.classes.push_back(make_class(1, path(3), p));
  MotifSet mixed;
  mixed.per_class[0] = {clique(3), clique(4)};  // one of two contained
  mixed.per_class[1] = {path(2)};
  CHECK_EQ(ground_truth_faithfulness(two, mixed), 0.75);

  // Classes without their own motifs are served from the shared pool.
  MotifSet fallback;
  fallback.per_class[0] = {clique(3)};
  fallback.shared = {path(2)};
  CHECK_EQ(fallback.for_class(0).size(), 1u);
  CHECK_EQ(fallback.for_class(1).size(), 1u);
  CHECK_EQ(fallback.for_class(1).front().node_count(), 2);
  CHECK_EQ(ground_truth_faithfulness(two, fallback), 1.0);

  CHECK_THROWS_AS(MotifSet{}.for_class(0), std::invalid_argument);
  CHECK_THROWS_AS(ground_truth_faithfulness(ExplanationReport{}, contained),
                  std::invalid_argument);
}

TEST_CASE("louvain recovers planted cliques") {
  const HeteroGraph g = two_cliques_bridged();
  const LouvainResult lr = louvain_communities(g);
  const std::vector<std::vector<NodeId>> expected = {{0, 1, 2, 3}, {4, 5, 6, 7}};
  CHECK(lr.communities == expected);
  CHECK(lr.modularity > 0.4);

  const LouvainResult again = louvain_communities(g);
  CHECK(again.communities == expected);
  CHECK_EQ(again.modularity, lr.modularity);

  const LouvainResult single = louvain_communities(clique(3));
  CHECK_EQ(single.communities.size(), 1u);
  CHECK(single.communities.front() == std::vector<NodeId>{0, 1, 2});
  CHECK_EQ(single.modularity, doctest::Approx(0.0).epsilon(1e-12));

  HeteroGraph ring = clique(5, 0);
  for (NodeId off : {NodeId{5}, NodeId{10}}) {
    const HeteroGraph part = clique(5, off);
    for (const auto& [id, type] : part.nodes()) ring.add_node(id, type);
    for (const auto& [u, v] : part.edges()) ring.add_edge(u, v);
  }
  ring.add_edge(4, 5);
  ring.add_edge(9, 10);
  ring.add_edge(14, 0);
  const LouvainResult three = louvain_communities(ring);
  REQUIRE_EQ(three.communities.size(), 3u);
  CHECK(three.communities[0] == std::vector<NodeId>{0, 1, 2, 3, 4});
  CHECK(three.communities[1] == std::vector<NodeId>{5, 6, 7, 8, 9});
  CHECK(three.communities[2] == std::vector<NodeId>{10, 11, 12, 13, 14});

  CHECK_THROWS_AS(louvain_communities(HeteroGraph{}), std::invalid_argument);
  HeteroGraph lonely;
  lonely.add_node(0, "node");
  CHECK_THROWS_AS(louvain_communities(lonely), std::invalid_argument);
}

TEST_CASE("louvain produces valid orderly partitions on random graphs") {
  std::mt19937_64 rng(901);
  std::uniform_int_distribution<int> size(2, 12);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = size(rng);
    const HeteroGraph g = random_connected(n, rng);
    const LouvainResult lr = louvain_communities(g);

    std::vector<NodeId> seen;
    for (std::size_t c = 0; c < lr.communities.size(); ++c) {
      const auto& members = lr.communities[c];
      REQUIRE(!members.empty());
      CHECK(std::is_sorted(members.begin(), members.end()));
      if (c > 0) {
        const auto& prev = lr.communities[c - 1];
        const bool ordered = prev.size() > members.size() ||
                             (prev.size() == members.size() &&
                              prev.front() < members.front());
        CHECK(ordered);
      }
      seen.insert(seen.end(), members.begin(), members.end());
    }
    std::sort(seen.begin(), seen.end());
    std::vector<NodeId> all;
    for (NodeId v = 0; v < n; ++v) all.push_back(v);
    CHECK(seen == all);

    REQUIRE(!lr.modularity_history.empty());
    for (std::size_t i = 1; i < lr.modularity_history.size(); ++i) {
      CHECK(lr.modularity_history[i] >= lr.modularity_history[i - 1] - 1e-9);
    }
    const double best = *std::max_element(lr.modularity_history.begin(),
                                          lr.modularity_history.end());
    CHECK_EQ(lr.modularity, doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("motif extraction files class-pure samples") {
  const DatasetSpec spec = node_spec(2);
  const std::vector<HeteroGraph> samples = {
      labeled(two_cliques_bridged(), 0), labeled(clique(3), 1)};

  const MotifSet set = extract_motifs(samples, spec, true);
  REQUIRE_EQ(set.per_class.size(), 2u);
  CHECK(set.fallback_classes.empty());
  CHECK(set.shared.empty());
  REQUIRE_EQ(set.per_class.at(0).size(), 1u);
  REQUIRE_EQ(set.per_class.at(1).size(), 1u);

  // The bridged sample contributes its largest community, one 4-clique.
  const HeteroGraph& motif0 = set.per_class.at(0).front();
  CHECK_EQ(motif0.node_count(), 4);
  CHECK_EQ(motif0.edge_count(), 6);
  CHECK(is_connected(motif0));
  CHECK(contains_subgraph(samples[0], motif0));
  CHECK_EQ(set.per_class.at(1).front().node_count(), 3);
}

TEST_CASE("motif extraction falls back when a class has no pure sample") {
  const DatasetSpec spec = node_spec(2);

  HeteroGraph impure = labeled(two_cliques_bridged(), 0);
  impure.class_labels[7] = 1;
  const std::vector<HeteroGraph> samples = {impure, labeled(clique(3), 1)};

  const MotifSet set = extract_motifs(samples, spec, true);
  CHECK(set.fallback_classes == std::vector<int>{0});
  CHECK_EQ(set.per_class.count(0), 0u);
  REQUIRE_EQ(set.per_class.at(1).size(), 1u);

  // The shared pool still draws from every sample, largest motifs first.
  REQUIRE_EQ(set.shared.size(), 2u);
  CHECK_EQ(set.shared[0].node_count(), 4);
  CHECK_EQ(set.shared[1].node_count(), 3);
  CHECK_EQ(set.for_class(0).size(), 2u);

  // An unlabeled classified node also disqualifies a sample.
  HeteroGraph partial = labeled(clique(3), 0);
  partial.class_labels.erase(0);
  const MotifSet gaps =
      extract_motifs({partial, labeled(clique(4), 1)}, spec, true);
  CHECK(gaps.fallback_classes == std::vector<int>{0});
}

TEST_CASE("shared-mode motif extraction pools and caps by size") {
  const DatasetSpec spec = node_spec(2);
  HeteroGraph isolated;
  isolated.add_node(0, "node");
  const std::vector<HeteroGraph> samples = {
      labeled(two_cliques_bridged(), 0), labeled(clique(3), 0),
      labeled(clique(5), 1), isolated};

  const MotifSet pooled = extract_motifs(samples, spec, false);
  CHECK(pooled.per_class.empty());
  CHECK(pooled.fallback_classes.empty());
  REQUIRE_EQ(pooled.shared.size(), 3u);
  CHECK_EQ(pooled.shared[0].node_count(), 5);
  CHECK_EQ(pooled.shared[1].node_count(), 4);
  CHECK_EQ(pooled.shared[2].node_count(), 3);

  const MotifSet capped = extract_motifs(samples, spec, false, 2);
  REQUIRE_EQ(capped.shared.size(), 2u);
  CHECK_EQ(capped.shared[0].node_count(), 5);
  CHECK_EQ(capped.shared[1].node_count(), 4);
}

TEST_CASE("graph-task motif extraction keys on the graph label") {
  DatasetSpec spec = node_spec(2);
  spec.task = Task::GraphClassification;

  HeteroGraph a = clique(4);
  a.graph_label = 0;
  HeteroGraph b = clique(3);
  b.graph_label = 1;
  HeteroGraph unlabeled = clique(5);

  const MotifSet set = extract_motifs({a, b, unlabeled}, spec, true);
  CHECK(set.fallback_classes.empty());
  REQUIRE_EQ(set.per_class.at(0).size(), 1u);
  REQUIRE_EQ(set.per_class.at(1).size(), 1u);
  CHECK_EQ(set.per_class.at(0).front().node_count(), 4);
  CHECK_EQ(set.per_class.at(1).front().node_count(), 3);
}

TEST_CASE("motif extraction rejects tiny communities and bad arguments") {
  const DatasetSpec spec = node_spec(2);

  // A two-node sample cannot seed a motif, so its class falls back, and
  // here the shared pool only holds the other class's clique.
  const std::vector<HeteroGraph> samples = {labeled(clique(2), 0),
                                            labeled(clique(3), 1)};
  const MotifSet set = extract_motifs(samples, spec, true);
  CHECK(set.fallback_classes == std::vector<int>{0});
  REQUIRE_EQ(set.shared.size(), 1u);
  CHECK_EQ(set.shared.front().node_count(), 3);

  CHECK_THROWS_AS(extract_motifs({}, spec, true), std::invalid_argument);
  CHECK_THROWS_AS(extract_motifs(samples, spec, true, 0), std::invalid_argument);
}
