#include "hegex/subgraph_iso.hpp"

#include <algorithm>
#include <vector>

namespace hegex {

namespace {

// Match order: start from the highest-degree motif node, then repeatedly
// take the node with the most already-ordered neighbors. Keeps the
// backtracking frontier connected whenever the motif is.
std::vector<int> match_order(const CompactGraph& motif) {
  const int n = motif.n();
  std::vector<int> order;
  order.reserve(n);
  std::vector<char> placed(n, 0);
  std::vector<int> placed_neighbors(n, 0);
  for (int step = 0; step < n; ++step) {
    int best = -1;
    for (int v = 0; v < n; ++v) {
      if (placed[v]) continue;
      if (best == -1 ||
          placed_neighbors[v] > placed_neighbors[best] ||
          (placed_neighbors[v] == placed_neighbors[best] &&
           motif.degree(v) > motif.degree(best))) {
        best = v;
      }
    }
    placed[best] = 1;
    order.push_back(best);
    for (int u : motif.adj[best]) ++placed_neighbors[u];
  }
  return order;
}

struct Matcher {
  const CompactGraph& host;
  const CompactGraph& motif;
  std::vector<int> order;
  std::vector<int> image;      // motif index -> host index, -1 if unmapped
  std::vector<char> used;      // host index occupied
  std::vector<int> type_map;   // motif type id -> host type id, -1 if absent

  bool run() {
    image.assign(motif.n(), -1);
    used.assign(host.n(), 0);
    order = match_order(motif);
    return extend(0);
  }

  bool feasible(int mv, int hv) const {
    if (used[hv]) return false;
    if (type_map[motif.type_ids[mv]] != host.type_ids[hv]) return false;
    if (host.degree(hv) < motif.degree(mv)) return false;
    for (int mu : motif.adj[mv]) {
      const int hu = image[mu];
      if (hu != -1 && !host.adjacent(hv, hu)) return false;
    }
    return true;
  }

  bool extend(std::size_t depth) {
    if (depth == order.size()) return true;
    const int mv = order[depth];
    // Restrict to neighbors of an already-mapped neighbor when one exists.
    int anchor = -1;
    for (int mu : motif.adj[mv]) {
      if (image[mu] != -1) { anchor = image[mu]; break; }
    }
    auto try_host = [&](int hv) {
      if (!feasible(mv, hv)) return false;
      image[mv] = hv;
      used[hv] = 1;
      const bool ok = extend(depth + 1);
      used[hv] = 0;
      image[mv] = -1;
      return ok;
    };
    if (anchor != -1) {
      for (int hv : host.adj[anchor]) {
        if (try_host(hv)) return true;
      }
    } else {
      for (int hv = 0; hv < host.n(); ++hv) {
        if (try_host(hv)) return true;
      }
    }
    return false;
  }
};

}  // namespace

bool contains_subgraph(const HeteroGraph& g, const HeteroGraph& motif) {
  if (motif.node_count() > g.node_count()) return false;
  if (motif.edge_count() > g.edge_count()) return false;
  if (motif.node_count() == 0) return true;
  const CompactGraph host = compact(g);
  const CompactGraph pat = compact(motif);

  std::vector<int> type_map(pat.type_names.size(), -1);
  for (std::size_t t = 0; t < pat.type_names.size(); ++t) {
    const auto it = std::find(host.type_names.begin(), host.type_names.end(),
                              pat.type_names[t]);
    if (it == host.type_names.end()) return false;  // motif type absent from g
    type_map[t] = static_cast<int>(it - host.type_names.begin());
  }

  Matcher m{host, pat, {}, {}, {}, std::move(type_map)};
  return m.run();
}

bool is_isomorphic(const HeteroGraph& a, const HeteroGraph& b) {
  if (a.node_count() != b.node_count()) return false;
  if (a.edge_count() != b.edge_count()) return false;
  if (a.node_count() == 0) return true;
  if (node_type_histogram(a) != node_type_histogram(b)) return false;
  // Equal node and edge counts make any monomorphism a bijection that
  // also hits every edge, i.e. an isomorphism.
  return contains_subgraph(a, b);
}

}  // namespace hegex
