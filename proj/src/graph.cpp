#include "hegex/graph.hpp"

#include <algorithm>
#include <cmath>

namespace hegex {

bool FeatureMatrix::in_alphabet(double v) const {
  return alphabet_index(v) >= 0;
}

int FeatureMatrix::alphabet_index(double v) const {
  for (size_t i = 0; i < alphabet.size(); ++i) {
    if (alphabet[i] == v) return static_cast<int>(i);
  }
  return -1;
}

void FeatureMatrix::validate() const {
  if (kind == Kind::Discrete) {
    if (alphabet.empty()) throw std::invalid_argument("discrete feature matrix has empty alphabet");
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
      for (Eigen::Index j = 0; j < rows.cols(); ++j)
        if (!in_alphabet(rows(i, j)))
          throw std::invalid_argument("feature cell not in alphabet at row " + std::to_string(i) +
                                      ", col " + std::to_string(j));
  } else {
    if (!rows.allFinite()) throw std::invalid_argument("continuous feature matrix has non-finite cell");
  }
}

std::pair<std::string, std::string> Metagraph::canonical(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

void Metagraph::add_type_edge(const std::string& a, const std::string& b) {
  types.insert(a);
  types.insert(b);
  type_edges.insert(canonical(a, b));
}

bool Metagraph::has_type_edge(const std::string& a, const std::string& b) const {
  return type_edges.count(canonical(a, b)) > 0;
}

void HeteroGraph::add_node(NodeId id, std::string type) {
  if (has_node(id)) throw std::invalid_argument("duplicate node id " + std::to_string(id));
  type_index_.emplace(id, type);
  nodes_.emplace_back(id, std::move(type));
}

bool HeteroGraph::add_edge(NodeId u, NodeId v) {
  if (u == v) throw std::invalid_argument("self-loop on node " + std::to_string(u));
  if (!has_node(u) || !has_node(v))
    throw std::invalid_argument("edge endpoint not declared: {" + std::to_string(u) + "," +
                                std::to_string(v) + "}");
  if (v < u) std::swap(u, v);
  return edges_.emplace(u, v).second;
}

bool HeteroGraph::has_edge(NodeId u, NodeId v) const {
  if (v < u) std::swap(u, v);
  return edges_.count({u, v}) > 0;
}

const std::string& HeteroGraph::type_of(NodeId id) const {
  auto it = type_index_.find(id);
  if (it == type_index_.end()) throw std::invalid_argument("unknown node id " + std::to_string(id));
  return it->second;
}

std::vector<NodeId> HeteroGraph::nodes_of_type(const std::string& type) const {
  std::vector<NodeId> out;
  for (const auto& [id, t] : nodes_)
    if (t == type) out.push_back(id);
  return out;
}

int HeteroGraph::type_rank(NodeId id) const {
  const std::string& t = type_of(id);
  int rank = 0;
  for (const auto& [nid, nt] : nodes_) {
    if (nid == id) return rank;
    if (nt == t) ++rank;
  }
  throw std::logic_error("node listed in index but not in node list");
}

std::optional<Eigen::RowVectorXd> HeteroGraph::feature_row(NodeId id) const {
  auto it = features.find(type_of(id));
  if (it == features.end()) return std::nullopt;
  return it->second.rows.row(type_rank(id));
}

void HeteroGraph::validate() const {
  for (const auto& [u, v] : edges_) {
    if (u == v) throw std::invalid_argument("self-loop stored");
    if (!has_node(u) || !has_node(v)) throw std::invalid_argument("dangling edge endpoint");
  }
  for (const auto& [type, fm] : features) {
    int count = static_cast<int>(nodes_of_type(type).size());
    if (fm.count() != count)
      throw std::invalid_argument("feature row count for type '" + type + "' is " +
                                  std::to_string(fm.count()) + ", expected " + std::to_string(count));
    fm.validate();
  }
  for (const auto& [id, label] : class_labels) {
    if (!has_node(id)) throw std::invalid_argument("class label on unknown node " + std::to_string(id));
    if (label < 0) throw std::invalid_argument("negative class label");
  }
}

bool HeteroGraph::operator==(const HeteroGraph& o) const {
  if (nodes_ != o.nodes_ || edges_ != o.edges_) return false;
  if (class_labels != o.class_labels || graph_label != o.graph_label) return false;
  if (features.size() != o.features.size()) return false;
  for (const auto& [type, fm] : features) {
    auto it = o.features.find(type);
    if (it == o.features.end()) return false;
    const FeatureMatrix& other = it->second;
    if (fm.kind != other.kind || fm.alphabet != other.alphabet) return false;
    if (fm.rows.rows() != other.rows.rows() || fm.rows.cols() != other.rows.cols()) return false;
    if (fm.rows != other.rows) return false;
  }
  return true;
}

bool CompactGraph::adjacent(int u, int v) const {
  const auto& nu = adj[u];
  return std::binary_search(nu.begin(), nu.end(), v);
}

CompactGraph compact(const HeteroGraph& g) {
  CompactGraph c;
  c.ids.reserve(g.node_count());
  std::set<std::string> type_set;
  for (const auto& [id, type] : g.nodes()) type_set.insert(type);
  c.type_names.assign(type_set.begin(), type_set.end());
  std::unordered_map<std::string, int> type_lookup;
  for (size_t i = 0; i < c.type_names.size(); ++i) type_lookup[c.type_names[i]] = static_cast<int>(i);

  for (const auto& [id, type] : g.nodes()) {
    c.index[id] = static_cast<int>(c.ids.size());
    c.ids.push_back(id);
    c.type_ids.push_back(type_lookup[type]);
  }
  c.adj.assign(c.ids.size(), {});
  for (const auto& [u, v] : g.edges()) {
    int ui = c.index[u], vi = c.index[v];
    c.adj[ui].push_back(vi);
    c.adj[vi].push_back(ui);
    c.edge_list.emplace_back(std::min(ui, vi), std::max(ui, vi));
  }
  for (auto& nbrs : c.adj) std::sort(nbrs.begin(), nbrs.end());
  std::sort(c.edge_list.begin(), c.edge_list.end());
  return c;
}

Metagraph extract_metagraph(const HeteroGraph& g) {
  Metagraph m;
  for (const auto& [id, type] : g.nodes()) m.types.insert(type);
  for (const auto& [u, v] : g.edges()) m.add_type_edge(g.type_of(u), g.type_of(v));
  return m;
}

bool is_valid_wrt_metagraph(const HeteroGraph& g, const Metagraph& m) {
  Metagraph gm = extract_metagraph(g);
  if (!std::includes(m.types.begin(), m.types.end(), gm.types.begin(), gm.types.end()))
    return false;
  return std::includes(m.type_edges.begin(), m.type_edges.end(), gm.type_edges.begin(),
                       gm.type_edges.end());
}

bool is_connected(const HeteroGraph& g) {
  if (g.node_count() == 0) throw std::invalid_argument("is_connected on empty graph");
  CompactGraph c = compact(g);
  std::vector<char> seen(c.n(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int visited = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int u : c.adj[v]) {
      if (!seen[u]) {
        seen[u] = 1;
        ++visited;
        stack.push_back(u);
      }
    }
  }
  return visited == c.n();
}

std::map<int, double> degree_histogram(const HeteroGraph& g) {
  if (g.node_count() == 0) throw std::invalid_argument("degree_histogram on empty graph");
  CompactGraph c = compact(g);
  std::map<int, double> hist;
  for (int v = 0; v < c.n(); ++v) hist[c.degree(v)] += 1.0;
  for (auto& [deg, val] : hist) val /= c.n();
  return hist;
}

std::map<std::string, double> node_type_histogram(const HeteroGraph& g) {
  if (g.node_count() == 0) throw std::invalid_argument("node_type_histogram on empty graph");
  std::map<std::string, double> hist;
  for (const auto& [id, type] : g.nodes()) hist[type] += 1.0;
  for (auto& [type, val] : hist) val /= g.node_count();
  return hist;
}

HeteroGraph induced_subgraph(const HeteroGraph& g, const std::vector<NodeId>& keep) {
  HeteroGraph out;
  std::set<NodeId> keep_set(keep.begin(), keep.end());
  // Preserve g's node order so feature rows stay aligned with type ranks.
  std::map<std::string, std::vector<int>> kept_rows;  // type -> source row indices
  for (const auto& [id, type] : g.nodes()) {
    if (keep_set.count(id)) {
      out.add_node(id, type);
      kept_rows[type].push_back(g.type_rank(id));
      auto lit = g.class_labels.find(id);
      if (lit != g.class_labels.end()) out.class_labels[id] = lit->second;
    }
  }
  for (const auto& [u, v] : g.edges())
    if (keep_set.count(u) && keep_set.count(v)) out.add_edge(u, v);
  for (const auto& [type, rows] : kept_rows) {
    auto fit = g.features.find(type);
    if (fit == g.features.end()) continue;
    FeatureMatrix fm;
    fm.kind = fit->second.kind;
    fm.alphabet = fit->second.alphabet;
    fm.rows.resize(static_cast<Eigen::Index>(rows.size()), fit->second.rows.cols());
    for (size_t r = 0; r < rows.size(); ++r) fm.rows.row(static_cast<Eigen::Index>(r)) = fit->second.rows.row(rows[r]);
    out.features[type] = std::move(fm);
  }
  out.graph_label = g.graph_label;
  return out;
}

}  // namespace hegex
