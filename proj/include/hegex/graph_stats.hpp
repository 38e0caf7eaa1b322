#pragma once

#include "hegex/graph.hpp"

#include <Eigen/Dense>

namespace hegex {

struct ClusteringResult {
  Eigen::VectorXd per_node;  // aligned with CompactGraph index order
  double mean = 0.0;
};

// Local clustering coefficient per node: triangles / (deg*(deg-1)/2),
// zero for degree < 2.
ClusteringResult clustering_coefficients(const HeteroGraph& g);

// Ascending eigenvalues of the symmetric normalized Laplacian
// I - D^{-1/2} A D^{-1/2}. Rows of isolated nodes are zeroed, so each
// isolated node contributes eigenvalue 0. Throws on an empty graph.
Eigen::VectorXd laplacian_spectrum(const HeteroGraph& g);

struct CycleCounts {
  Eigen::VectorXd triangles;     // per node, CompactGraph index order
  Eigen::VectorXd four_cycles;
  Eigen::VectorXd five_cycles;
};

// Number of distinct simple cycles of length 3/4/5 through each node.
CycleCounts cycle_participation_counts(const CompactGraph& c);

}  // namespace hegex
