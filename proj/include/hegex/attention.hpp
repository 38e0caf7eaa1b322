#pragma once

#include "hegex/nn.hpp"

#include <Eigen/Dense>

#include <random>
#include <utility>
#include <vector>

namespace hegex {

// One graph-transformer layer over node states X (n x width) and pair
// states E (n^2 x pair_width, row p = i*n + j, kept symmetric in (i,j)).
// Attention scores mix node dot products with a per-head bias read from
// the pair state; symmetrized scores write the pair update. Both tracks
// get residual + LayerNorm + feed-forward.
class GraphTransformerLayer {
 public:
  GraphTransformerLayer(int width, int pair_width, int heads,
                        std::mt19937_64& rng);

  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> forward(const Eigen::MatrixXd& x,
                                                      const Eigen::MatrixXd& e);
  // Gradients w.r.t. the inputs; parameter gradients accumulate.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> backward(
      const Eigen::MatrixXd& gx, const Eigen::MatrixXd& ge);

  void collect(std::vector<ParamRef>& out);

  int width() const { return width_; }
  int pair_width() const { return pair_width_; }
  int heads() const { return heads_; }

 private:
  int width_, pair_width_, heads_, head_dim_;
  Linear lq_, lk_, lv_, lo_;    // node projections, width -> width
  Linear lb_;                   // pair -> per-head attention bias
  Linear lpe_;                  // symmetrized scores -> pair update
  LayerNorm ln_x1_, ln_x2_, ln_e1_, ln_e2_;
  Linear ffx1_, ffx2_, ffe1_, ffe2_;
  ReLU relu_x_, relu_e_;

  // forward cache
  Eigen::MatrixXd q_, k_, v_;
  std::vector<Eigen::MatrixXd> attn_;  // per-head softmax weights, n x n
  Eigen::Index n_ = 0;
};

}  // namespace hegex
