#include "hegex/graph_stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace hegex {

namespace {

// Triangles through each node, computed from sorted adjacency lists.
Eigen::VectorXd triangle_counts(const CompactGraph& c) {
  const int n = c.n();
  Eigen::VectorXd tri = Eigen::VectorXd::Zero(n);
  for (int v = 0; v < n; ++v) {
    double paths = 0.0;
    for (int u : c.adj[v]) {
      std::vector<int> common;
      std::set_intersection(c.adj[v].begin(), c.adj[v].end(),
                            c.adj[u].begin(), c.adj[u].end(),
                            std::back_inserter(common));
      paths += static_cast<double>(common.size());
    }
    tri[v] = paths / 2.0;
  }
  return tri;
}

}  // namespace

ClusteringResult clustering_coefficients(const HeteroGraph& g) {
  const CompactGraph c = compact(g);
  const int n = c.n();
  if (n == 0) throw std::invalid_argument("clustering_coefficients: empty graph");
  const Eigen::VectorXd tri = triangle_counts(c);
  ClusteringResult out;
  out.per_node = Eigen::VectorXd::Zero(n);
  for (int v = 0; v < n; ++v) {
    const double d = static_cast<double>(c.degree(v));
    if (d < 2.0) continue;
    out.per_node[v] = tri[v] / (d * (d - 1.0) / 2.0);
  }
  out.mean = out.per_node.mean();
  return out;
}

Eigen::VectorXd laplacian_spectrum(const HeteroGraph& g) {
  const CompactGraph c = compact(g);
  const int n = c.n();
  if (n == 0) throw std::invalid_argument("laplacian_spectrum: empty graph");
  Eigen::VectorXd dinv = Eigen::VectorXd::Zero(n);
  for (int v = 0; v < n; ++v) {
    const int d = c.degree(v);
    if (d > 0) dinv[v] = 1.0 / std::sqrt(static_cast<double>(d));
  }
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (int v = 0; v < n; ++v) {
    if (c.degree(v) > 0) lap(v, v) = 1.0;  // isolated nodes keep a zero row
    for (int u : c.adj[v]) lap(v, u) = -dinv[v] * dinv[u];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("laplacian_spectrum: eigensolver failed");
  }
  Eigen::VectorXd vals = solver.eigenvalues();
  for (int i = 0; i < n; ++i) vals[i] = std::clamp(vals[i], 0.0, 2.0);
  return vals;
}

CycleCounts cycle_participation_counts(const CompactGraph& c) {
  const int n = c.n();
  CycleCounts out;
  out.triangles = triangle_counts(c);
  out.four_cycles = Eigen::VectorXd::Zero(n);
  out.five_cycles = Eigen::VectorXd::Zero(n);

  // Closed 4-walks at v decompose into back-and-forth walks plus proper
  // 4-cycles, each cycle walked in two directions:
  //   (A^4)_vv = deg(v)^2 + sum_{u in N(v)} (deg(u) - 1) + 2 * c4(v)
  for (int v = 0; v < n; ++v) {
    double walks = 0.0;
    for (int a : c.adj[v]) {
      for (int b : c.adj[a]) {
        std::vector<int> common;
        std::set_intersection(c.adj[b].begin(), c.adj[b].end(),
                              c.adj[v].begin(), c.adj[v].end(),
                              std::back_inserter(common));
        walks += static_cast<double>(common.size());
      }
    }
    double spurious = static_cast<double>(c.degree(v)) * c.degree(v);
    for (int u : c.adj[v]) spurious += static_cast<double>(c.degree(u)) - 1.0;
    out.four_cycles[v] = (walks - spurious) / 2.0;
  }

  // 5-cycles by DFS. Canonical form: the path starts at the cycle's
  // smallest index and the second node is smaller than the last.
  std::vector<int> path;
  path.reserve(5);
  std::vector<char> in_path(n, 0);
  for (int s = 0; s < n; ++s) {
    path = {s};
    in_path[s] = 1;
    auto dfs = [&](auto&& self, int v) -> void {
      if (path.size() == 5) {
        if (c.adjacent(v, s) && path[1] < path[4]) {
          for (int w : path) out.five_cycles[w] += 1.0;
        }
        return;
      }
      for (int u : c.adj[v]) {
        if (u <= s || in_path[u]) continue;
        path.push_back(u);
        in_path[u] = 1;
        self(self, u);
        path.pop_back();
        in_path[u] = 0;
      }
    };
    dfs(dfs, s);
    in_path[s] = 0;
  }
  return out;
}

}  // namespace hegex
