#pragma once

#include "hegex/graph.hpp"

namespace hegex {

// True iff an injective node map from motif into g exists that preserves
// node types and maps every motif edge onto a g edge. Non-induced: extra
// edges between image nodes are allowed.
bool contains_subgraph(const HeteroGraph& g, const HeteroGraph& motif);

// Type-preserving graph isomorphism between equally sized graphs.
bool is_isomorphic(const HeteroGraph& a, const HeteroGraph& b);

}  // namespace hegex
