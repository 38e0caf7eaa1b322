#include "hegex/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace hegex {

namespace {

Eigen::MatrixXd unflatten_pairs(const Eigen::VectorXd& col, Eigen::Index n) {
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = col[i * n + j];
  }
  return m;
}

Eigen::VectorXd flatten_pairs(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  Eigen::VectorXd col(n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) col[i * n + j] = m(i, j);
  }
  return col;
}

// d(softmax)/d(scores) applied rowwise to an incoming gradient.
Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& attn,
                                 const Eigen::MatrixXd& gattn) {
  Eigen::MatrixXd gs = attn.cwiseProduct(gattn);
  const Eigen::VectorXd row_dot = gs.rowwise().sum();
  gs.array() -= attn.array().colwise() * row_dot.array();
  return gs;
}

}  // namespace

GraphTransformerLayer::GraphTransformerLayer(int width, int pair_width,
                                             int heads, std::mt19937_64& rng)
    : width_(width),
      pair_width_(pair_width),
      heads_(heads),
      head_dim_(width / heads),
      lq_(width, width, rng),
      lk_(width, width, rng),
      lv_(width, width, rng),
      lo_(width, width, rng),
      lb_(pair_width, heads, rng),
      lpe_(heads, pair_width, rng),
      ln_x1_(width),
      ln_x2_(width),
      ln_e1_(pair_width),
      ln_e2_(pair_width),
      ffx1_(width, 2 * width, rng),
      ffx2_(2 * width, width, rng),
      ffe1_(pair_width, 2 * pair_width, rng),
      ffe2_(2 * pair_width, pair_width, rng) {
  if (width % heads != 0) {
    throw std::invalid_argument("GraphTransformerLayer: heads must divide width");
  }
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> GraphTransformerLayer::forward(
    const Eigen::MatrixXd& x, const Eigen::MatrixXd& e) {
  n_ = x.rows();
  if (e.rows() != n_ * n_ || e.cols() != pair_width_) {
    throw std::invalid_argument("GraphTransformerLayer: pair state shape");
  }
  q_ = lq_.forward(x, false, nullptr);
  k_ = lk_.forward(x, false, nullptr);
  v_ = lv_.forward(x, false, nullptr);
  const Eigen::MatrixXd bias = lb_.forward(e, false, nullptr);  // n^2 x heads

  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  Eigen::MatrixXd out(n_, width_);
  Eigen::MatrixXd sym_scores(n_ * n_, heads_);
  attn_.assign(heads_, Eigen::MatrixXd());
  for (int h = 0; h < heads_; ++h) {
    const auto qh = q_.middleCols(h * head_dim_, head_dim_);
    const auto kh = k_.middleCols(h * head_dim_, head_dim_);
    const auto vh = v_.middleCols(h * head_dim_, head_dim_);
    Eigen::MatrixXd scores = qh * kh.transpose() * scale;
    scores += unflatten_pairs(bias.col(h), n_);
    attn_[h] = softmax_rows(scores);
    out.middleCols(h * head_dim_, head_dim_) = attn_[h] * vh;
    sym_scores.col(h) = flatten_pairs(0.5 * (scores + scores.transpose()));
  }

  const Eigen::MatrixXd xp = lo_.forward(out, false, nullptr);
  const Eigen::MatrixXd ep = lpe_.forward(sym_scores, false, nullptr);

  const Eigen::MatrixXd xr = ln_x1_.forward(x + xp, false, nullptr);
  const Eigen::MatrixXd er = ln_e1_.forward(e + ep, false, nullptr);

  const Eigen::MatrixXd xf = ffx2_.forward(
      relu_x_.forward(ffx1_.forward(xr, false, nullptr), false, nullptr), false,
      nullptr);
  const Eigen::MatrixXd ef = ffe2_.forward(
      relu_e_.forward(ffe1_.forward(er, false, nullptr), false, nullptr), false,
      nullptr);

  return {ln_x2_.forward(xr + xf, false, nullptr),
          ln_e2_.forward(er + ef, false, nullptr)};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> GraphTransformerLayer::backward(
    const Eigen::MatrixXd& gx_out, const Eigen::MatrixXd& ge_out) {
  // feed-forward + second norm, node track
  const Eigen::MatrixXd gx_sum = ln_x2_.backward(gx_out);
  Eigen::MatrixXd gxr =
      gx_sum + ffx1_.backward(relu_x_.backward(ffx2_.backward(gx_sum)));
  const Eigen::MatrixXd ge_sum = ln_e2_.backward(ge_out);
  Eigen::MatrixXd ger =
      ge_sum + ffe1_.backward(relu_e_.backward(ffe2_.backward(ge_sum)));

  // first norm: gradient w.r.t. (input + update)
  const Eigen::MatrixXd gx_add = ln_x1_.backward(gxr);
  const Eigen::MatrixXd ge_add = ln_e1_.backward(ger);
  Eigen::MatrixXd gx = gx_add;  // residual path
  Eigen::MatrixXd ge = ge_add;

  const Eigen::MatrixXd gout = lo_.backward(gx_add);
  const Eigen::MatrixXd gsym = lpe_.backward(ge_add);  // n^2 x heads

  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  Eigen::MatrixXd gq(n_, width_), gk(n_, width_), gv(n_, width_);
  Eigen::MatrixXd gbias(n_ * n_, heads_);
  for (int h = 0; h < heads_; ++h) {
    const auto qh = q_.middleCols(h * head_dim_, head_dim_);
    const auto kh = k_.middleCols(h * head_dim_, head_dim_);
    const auto vh = v_.middleCols(h * head_dim_, head_dim_);
    const auto gout_h = gout.middleCols(h * head_dim_, head_dim_);

    const Eigen::MatrixXd gattn = gout_h * vh.transpose();
    gv.middleCols(h * head_dim_, head_dim_) = attn_[h].transpose() * gout_h;

    Eigen::MatrixXd gscores = softmax_backward(attn_[h], gattn);
    const Eigen::MatrixXd gp = unflatten_pairs(gsym.col(h), n_);
    gscores += 0.5 * (gp + gp.transpose());

    gq.middleCols(h * head_dim_, head_dim_) = gscores * kh * scale;
    gk.middleCols(h * head_dim_, head_dim_) = gscores.transpose() * qh * scale;
    gbias.col(h) = flatten_pairs(gscores);
  }

  gx += lq_.backward(gq) + lk_.backward(gk) + lv_.backward(gv);
  ge += lb_.backward(gbias);
  return {gx, ge};
}

void GraphTransformerLayer::collect(std::vector<ParamRef>& out) {
  lq_.collect(out);
  lk_.collect(out);
  lv_.collect(out);
  lo_.collect(out);
  lb_.collect(out);
  lpe_.collect(out);
  ln_x1_.collect(out);
  ln_x2_.collect(out);
  ln_e1_.collect(out);
  ln_e2_.collect(out);
  ffx1_.collect(out);
  ffx2_.collect(out);
  ffe1_.collect(out);
  ffe2_.collect(out);
}

}  // namespace hegex
