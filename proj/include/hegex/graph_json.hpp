#pragma once

#include "hegex/graph.hpp"

#include <string>

namespace hegex {

// Text format per graph:
//   {nodes:[{id,type}], edges:[[u,v]], features:{type:{kind,alphabet?,rows}},
//    labels?, graph_label?}
std::string write_hetero_graph(const HeteroGraph& g);
HeteroGraph load_hetero_graph(const std::string& bytes);

void save_graph_file(const HeteroGraph& g, const std::string& path);
HeteroGraph load_graph_file(const std::string& path);

}  // namespace hegex
