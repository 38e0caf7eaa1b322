#include "hegex/graph_json.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace hegex {

using ordered_json = nlohmann::ordered_json;

std::string write_hetero_graph(const HeteroGraph& g) {
  ordered_json doc;
  doc["nodes"] = ordered_json::array();
  for (const auto& [id, type] : g.nodes()) {
    doc["nodes"].push_back({{"id", id}, {"type", type}});
  }
  doc["edges"] = ordered_json::array();
  for (const auto& [u, v] : g.edges()) {
    doc["edges"].push_back({u, v});
  }
  doc["features"] = ordered_json::object();
  for (const auto& [type, fm] : g.features) {
    ordered_json jf;
    jf["kind"] = fm.kind == FeatureMatrix::Kind::Discrete ? "discrete" : "continuous";
    if (fm.kind == FeatureMatrix::Kind::Discrete) jf["alphabet"] = fm.alphabet;
    ordered_json rows = ordered_json::array();
    for (int r = 0; r < fm.rows.rows(); ++r) {
      ordered_json row = ordered_json::array();
      for (int c = 0; c < fm.rows.cols(); ++c) row.push_back(fm.rows(r, c));
      rows.push_back(std::move(row));
    }
    jf["rows"] = std::move(rows);
    doc["features"][type] = std::move(jf);
  }
  if (!g.class_labels.empty()) {
    ordered_json labels = ordered_json::object();
    for (const auto& [id, cls] : g.class_labels) {
      labels[std::to_string(id)] = cls;
    }
    doc["labels"] = std::move(labels);
  }
  if (g.graph_label) doc["graph_label"] = *g.graph_label;
  return doc.dump(2) + "\n";
}

HeteroGraph load_hetero_graph(const std::string& bytes) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("graph parse error: ") + e.what());
  }
  auto fail = [](const std::string& where, const std::string& what) -> void {
    throw std::runtime_error("graph parse error at " + where + ": " + what);
  };

  HeteroGraph g;
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
    fail("nodes", "missing or not an array");
  }
  for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
    const auto& jn = doc["nodes"][i];
    if (!jn.contains("id") || !jn["id"].is_number_integer()) {
      fail("nodes[" + std::to_string(i) + "]", "missing integer id");
    }
    if (!jn.contains("type") || !jn["type"].is_string()) {
      fail("nodes[" + std::to_string(i) + "]", "missing string type");
    }
    g.add_node(jn["id"].get<NodeId>(), jn["type"].get<std::string>());
  }
  if (!doc.contains("edges") || !doc["edges"].is_array()) {
    fail("edges", "missing or not an array");
  }
  for (std::size_t i = 0; i < doc["edges"].size(); ++i) {
    const auto& je = doc["edges"][i];
    if (!je.is_array() || je.size() != 2) {
      fail("edges[" + std::to_string(i) + "]", "expected [u, v]");
    }
    g.add_edge(je[0].get<NodeId>(), je[1].get<NodeId>());
  }
  if (doc.contains("features")) {
    if (!doc["features"].is_object()) fail("features", "not an object");
    for (const auto& [type, jf] : doc["features"].items()) {
      FeatureMatrix fm;
      if (!jf.contains("kind") || !jf["kind"].is_string()) {
        fail("features." + type, "missing kind");
      }
      const std::string kind = jf["kind"].get<std::string>();
      if (kind == "discrete") {
        fm.kind = FeatureMatrix::Kind::Discrete;
      } else if (kind == "continuous") {
        fm.kind = FeatureMatrix::Kind::Continuous;
      } else {
        fail("features." + type + ".kind", "expected discrete or continuous");
      }
      if (fm.kind == FeatureMatrix::Kind::Discrete) {
        if (!jf.contains("alphabet") || !jf["alphabet"].is_array()) {
          fail("features." + type, "discrete features need an alphabet");
        }
        fm.alphabet = jf["alphabet"].get<std::vector<double>>();
      }
      if (!jf.contains("rows") || !jf["rows"].is_array()) {
        fail("features." + type, "missing rows");
      }
      const auto& jrows = jf["rows"];
      const int nrows = static_cast<int>(jrows.size());
      int ncols = 0;
      if (nrows > 0) {
        if (!jrows[0].is_array()) fail("features." + type + ".rows", "rows must be arrays");
        ncols = static_cast<int>(jrows[0].size());
      }
      fm.rows.resize(nrows, ncols);
      for (int r = 0; r < nrows; ++r) {
        if (!jrows[r].is_array() || static_cast<int>(jrows[r].size()) != ncols) {
          fail("features." + type + ".rows[" + std::to_string(r) + "]", "ragged row");
        }
        for (int c = 0; c < ncols; ++c) fm.rows(r, c) = jrows[r][c].get<double>();
      }
      g.features[type] = std::move(fm);
    }
  }
  if (doc.contains("labels")) {
    if (!doc["labels"].is_object()) fail("labels", "not an object");
    for (const auto& [key, val] : doc["labels"].items()) {
      g.class_labels[std::stoi(key)] = val.get<int>();
    }
  }
  if (doc.contains("graph_label")) g.graph_label = doc["graph_label"].get<int>();
  g.validate();
  return g;
}

void save_graph_file(const HeteroGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << write_hetero_graph(g);
  if (!out) throw std::runtime_error("write failed: " + path);
}

HeteroGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  try {
    return load_hetero_graph(bytes);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace hegex
