#include "hegex/subgraph_iso.hpp"

#include "hegex/datasets.hpp"

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <vector>

using namespace hegex;

namespace {

HeteroGraph complete(int n, const std::string& type = "n") {
  HeteroGraph g;
  for (NodeId v = 0; v < n; ++v) g.add_node(v, type);
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) g.add_edge(u, v);
  }
  return g;
}

HeteroGraph random_typed_graph(int n, double p, int types, std::mt19937_64& rng) {
  HeteroGraph g;
  std::uniform_int_distribution<int> pick_type(0, types - 1);
  for (NodeId v = 0; v < n; ++v) {
    g.add_node(v, std::string(1, static_cast<char>('a' + pick_type(rng))));
  }
  std::bernoulli_distribution coin(p);
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (coin(rng)) g.add_edge(u, v);
    }
  }
  return g;
}

// Exhaustive injective-map search: tries every assignment of motif nodes to
// distinct host nodes with matching types and all motif edges present.
bool brute_force_contains(const HeteroGraph& host, const HeteroGraph& motif) {
  std::vector<NodeId> mnodes, hnodes;
  for (const auto& [id, t] : motif.nodes()) mnodes.push_back(id);
  for (const auto& [id, t] : host.nodes()) hnodes.push_back(id);
  if (mnodes.size() > hnodes.size()) return false;

  std::vector<NodeId> image(mnodes.size(), -1);
  std::vector<char> used(hnodes.size(), 0);

  std::function<bool(std::size_t)> place = [&](std::size_t at) -> bool {
    if (at == mnodes.size()) return true;
    for (std::size_t h = 0; h < hnodes.size(); ++h) {
      if (used[h]) continue;
      if (host.type_of(hnodes[h]) != motif.type_of(mnodes[at])) continue;
      bool ok = true;
      for (std::size_t prev = 0; prev < at && ok; ++prev) {
        const bool need = motif.has_edge(mnodes[at], mnodes[prev]);
        if (need && !host.has_edge(hnodes[h], image[prev])) ok = false;
      }
      if (!ok) continue;
      used[h] = 1;
      image[at] = hnodes[h];
      if (place(at + 1)) return true;
      used[h] = 0;
    }
    return false;
  };
  return place(0);
}

}  // namespace

TEST_CASE("a graph contains itself and is isomorphic to itself") {
  const HeteroGraph house = house_motif();
  CHECK(contains_subgraph(house, house));
  CHECK(is_isomorphic(house, house));
}

TEST_CASE("triangle in a 4-cycle is absent, in K4 present") {
  const HeteroGraph tri = complete(3);
  CHECK_FALSE(contains_subgraph(cycle_motif(4, "n"), tri));
  CHECK(contains_subgraph(complete(4), tri));
}

TEST_CASE("containment is not induced: extra edges are fine") {
  HeteroGraph path;
  for (NodeId v = 0; v < 3; ++v) path.add_node(v, "n");
  path.add_edge(0, 1);
  path.add_edge(1, 2);
  CHECK(contains_subgraph(complete(3), path));
}

TEST_CASE("types must match") {
  HeteroGraph host;
  host.add_node(0, "a");
  host.add_node(1, "b");
  host.add_edge(0, 1);

  HeteroGraph motif_ok;
  motif_ok.add_node(0, "b");
  motif_ok.add_node(1, "a");
  motif_ok.add_edge(0, 1);
  CHECK(contains_subgraph(host, motif_ok));

  HeteroGraph motif_bad;
  motif_bad.add_node(0, "a");
  motif_bad.add_node(1, "a");
  motif_bad.add_edge(0, 1);
  CHECK_FALSE(contains_subgraph(host, motif_bad));
  CHECK_FALSE(is_isomorphic(host, motif_bad));
}

TEST_CASE("isomorphism distinguishes same-degree-sequence graphs") {
  const HeteroGraph c6 = cycle_motif(6);
  HeteroGraph two_triangles;
  for (NodeId v = 0; v < 6; ++v) two_triangles.add_node(v, "node");
  two_triangles.add_edge(0, 1);
  two_triangles.add_edge(1, 2);
  two_triangles.add_edge(0, 2);
  two_triangles.add_edge(3, 4);
  two_triangles.add_edge(4, 5);
  two_triangles.add_edge(3, 5);
  CHECK_FALSE(is_isomorphic(c6, two_triangles));

  // relabeling is invisible to isomorphism
  HeteroGraph shuffled;
  const int perm[6] = {4, 2, 0, 5, 1, 3};
  for (NodeId v = 0; v < 6; ++v) shuffled.add_node(v, "node");
  for (const auto& [u, v] : c6.edges()) shuffled.add_edge(perm[u], perm[v]);
  CHECK(is_isomorphic(c6, shuffled));

  CHECK_FALSE(is_isomorphic(c6, cycle_motif(5)));
}

TEST_CASE("ba-shapes output contains the house") {
  std::mt19937_64 rng(5);
  const HeteroGraph g = gen_ba_shapes(12, 2, rng);
  CHECK(contains_subgraph(g, house_motif()));
}

TEST_CASE("agrees with brute-force enumeration on random cases") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> motif_n(2, 5);
  std::uniform_int_distribution<int> host_n(3, 7);
  std::uniform_real_distribution<double> dens(0.2, 0.7);
  int positives = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const HeteroGraph motif = random_typed_graph(motif_n(rng), dens(rng), 2, rng);
    const HeteroGraph host = random_typed_graph(host_n(rng), dens(rng), 2, rng);
    const bool expected = brute_force_contains(host, motif);
    CHECK_EQ(contains_subgraph(host, motif), expected);
    positives += expected;
  }
  // sanity: the sample covers both outcomes
  CHECK_GT(positives, 0);
  CHECK_LT(positives, 60);
}
