#pragma once

#include <Eigen/Core>

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hegex {

using NodeId = int;

/// Feature block for one node type: either a categorical matrix over an
/// ordered alphabet of allowed values, or a plain real-valued matrix.
struct FeatureMatrix {
  enum class Kind { Discrete, Continuous };

  Kind kind = Kind::Continuous;
  std::vector<double> alphabet;  // Discrete only; ordered set of allowed values
  Eigen::MatrixXd rows;          // one row per node of this type

  int width() const { return static_cast<int>(rows.cols()); }
  int count() const { return static_cast<int>(rows.rows()); }

  bool in_alphabet(double v) const;
  int alphabet_index(double v) const;  // -1 if absent

  // Throws std::invalid_argument on an out-of-alphabet cell (Discrete) or a
  // non-finite cell (Continuous).
  void validate() const;
};

/// Type-level schema: which node types exist and which unordered type pairs
/// may carry edges. Pairs are stored with the lexicographically smaller type
/// first.
struct Metagraph {
  std::set<std::string> types;
  std::set<std::pair<std::string, std::string>> type_edges;

  static std::pair<std::string, std::string> canonical(std::string a, std::string b);
  void add_type_edge(const std::string& a, const std::string& b);
  bool has_type_edge(const std::string& a, const std::string& b) const;
  bool operator==(const Metagraph&) const = default;
};

/// Undirected simple graph with typed nodes, optional per-type feature
/// matrices, optional node class labels, and an optional graph label.
///
/// Edges are stored canonically (smaller id first), self-loops rejected.
/// Feature matrices are indexed per type; row r of features[tau] belongs to
/// the r-th node of type tau in node insertion order.
class HeteroGraph {
 public:
  void add_node(NodeId id, std::string type);
  // Returns false when the edge already exists. Throws on self-loops and
  // undeclared endpoints.
  bool add_edge(NodeId u, NodeId v);

  bool has_node(NodeId id) const { return type_index_.count(id) > 0; }
  bool has_edge(NodeId u, NodeId v) const;
  const std::string& type_of(NodeId id) const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  const std::vector<std::pair<NodeId, std::string>>& nodes() const { return nodes_; }
  const std::set<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

  std::vector<NodeId> nodes_of_type(const std::string& type) const;
  // Position of `id` among nodes of its own type (row index into the type's
  // feature matrix).
  int type_rank(NodeId id) const;

  // Feature row for a node, or nullopt when its type has no feature matrix.
  std::optional<Eigen::RowVectorXd> feature_row(NodeId id) const;

  // Checks edge endpoints, feature matrix row counts and cell domains.
  void validate() const;

  std::map<std::string, FeatureMatrix> features;
  std::map<NodeId, int> class_labels;
  std::optional<int> graph_label;

  bool operator==(const HeteroGraph& o) const;

 private:
  std::vector<std::pair<NodeId, std::string>> nodes_;
  std::set<std::pair<NodeId, NodeId>> edges_;
  std::unordered_map<NodeId, std::string> type_index_;
};

/// Index-compressed view used by the graph algorithms: contiguous node
/// indices, interned type ids, sorted adjacency lists.
struct CompactGraph {
  std::vector<NodeId> ids;                  // index -> original id
  std::unordered_map<NodeId, int> index;    // original id -> index
  std::vector<int> type_ids;                // index -> type id
  std::vector<std::string> type_names;      // type id -> name (sorted)
  std::vector<std::vector<int>> adj;        // sorted neighbor indices
  std::vector<std::pair<int, int>> edge_list;  // u < v, index pairs

  int n() const { return static_cast<int>(ids.size()); }
  int degree(int v) const { return static_cast<int>(adj[v].size()); }
  bool adjacent(int u, int v) const;
};

CompactGraph compact(const HeteroGraph& g);

Metagraph extract_metagraph(const HeteroGraph& g);
bool is_valid_wrt_metagraph(const HeteroGraph& g, const Metagraph& m);

bool is_connected(const HeteroGraph& g);

// Normalized histogram over node degrees; entries sum to 1. Throws on an
// empty graph.
std::map<int, double> degree_histogram(const HeteroGraph& g);
// Normalized histogram over node types; entries sum to 1. Throws on an
// empty graph.
std::map<std::string, double> node_type_histogram(const HeteroGraph& g);

// Induced subgraph on the given node ids; keeps types, labels and the
// matching feature rows.
HeteroGraph induced_subgraph(const HeteroGraph& g, const std::vector<NodeId>& keep);

}  // namespace hegex
