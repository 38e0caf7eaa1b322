#include "hegex/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace hegex {

namespace {

void check_width(const Eigen::MatrixXd& x, Eigen::Index want, const char* who) {
  if (x.cols() != want) {
    throw std::invalid_argument(std::string(who) + ": expected " +
                                std::to_string(want) + " columns, got " +
                                std::to_string(x.cols()));
  }
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

}  // namespace

Linear::Linear(int in, int out, std::mt19937_64& rng) {
  if (in < 1 || out < 1) throw std::invalid_argument("Linear: bad shape");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  w.resize(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  b = Eigen::MatrixXd::Zero(1, out);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
  gw = Eigen::MatrixXd::Zero(in, out);
  gb = Eigen::MatrixXd::Zero(1, out);
}

Eigen::MatrixXd Linear::forward(const Eigen::MatrixXd& x, bool, std::mt19937_64*) {
  check_width(x, w.rows(), "Linear");
  x_ = x;
  return (x * w).rowwise() + b.row(0);
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd& gout) {
  gw += x_.transpose() * gout;
  gb.row(0) += gout.colwise().sum();
  return gout * w.transpose();
}

void Linear::collect(std::vector<ParamRef>& out) {
  out.push_back({&w, &gw});
  out.push_back({&b, &gb});
}

Eigen::MatrixXd SiLU::forward(const Eigen::MatrixXd& x, bool, std::mt19937_64*) {
  x_ = x;
  return x.cwiseProduct(sigmoid(x));
}

Eigen::MatrixXd SiLU::backward(const Eigen::MatrixXd& gout) {
  const Eigen::ArrayXXd s = sigmoid(x_).array();
  return (gout.array() * (s * (1.0 + x_.array() * (1.0 - s)))).matrix();
}

Eigen::MatrixXd ReLU::forward(const Eigen::MatrixXd& x, bool, std::mt19937_64*) {
  x_ = x;
  return x.cwiseMax(0.0);
}

Eigen::MatrixXd ReLU::backward(const Eigen::MatrixXd& gout) {
  return (gout.array() * (x_.array() > 0.0).cast<double>()).matrix();
}

Dropout::Dropout(double p) : p_(p) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("Dropout: p outside [0,1)");
}

Eigen::MatrixXd Dropout::forward(const Eigen::MatrixXd& x, bool train,
                                 std::mt19937_64* rng) {
  active_ = train && p_ > 0.0;
  if (!active_) return x;
  if (!rng) throw std::invalid_argument("Dropout: training needs an rng");
  std::bernoulli_distribution keep(1.0 - p_);
  mask_.resize(x.rows(), x.cols());
  const double scale = 1.0 / (1.0 - p_);
  for (Eigen::Index i = 0; i < mask_.size(); ++i) {
    mask_.data()[i] = keep(*rng) ? scale : 0.0;
  }
  return x.cwiseProduct(mask_);
}

Eigen::MatrixXd Dropout::backward(const Eigen::MatrixXd& gout) {
  if (!active_) return gout;
  return gout.cwiseProduct(mask_);
}

LayerNorm::LayerNorm(int dim, double eps) : eps_(eps) {
  if (dim < 1) throw std::invalid_argument("LayerNorm: bad dim");
  gamma = Eigen::MatrixXd::Ones(1, dim);
  beta = Eigen::MatrixXd::Zero(1, dim);
  ggamma = Eigen::MatrixXd::Zero(1, dim);
  gbeta = Eigen::MatrixXd::Zero(1, dim);
}

Eigen::MatrixXd LayerNorm::forward(const Eigen::MatrixXd& x, bool, std::mt19937_64*) {
  check_width(x, gamma.cols(), "LayerNorm");
  const Eigen::VectorXd mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - mean;
  const Eigen::VectorXd var = centered.array().square().rowwise().mean();
  inv_std_ = (var.array() + eps_).rsqrt().matrix();
  xhat_ = (centered.array().colwise() * inv_std_.array()).matrix();
  Eigen::MatrixXd y = xhat_;
  y.array().rowwise() *= gamma.row(0).array();
  y.array().rowwise() += beta.row(0).array();
  return y;
}

Eigen::MatrixXd LayerNorm::backward(const Eigen::MatrixXd& gout) {
  ggamma.row(0) += (gout.array() * xhat_.array()).colwise().sum().matrix();
  gbeta.row(0) += gout.colwise().sum();
  const Eigen::ArrayXXd gxhat = gout.array().rowwise() * gamma.row(0).array();
  const Eigen::ArrayXd row_mean = gxhat.rowwise().mean();
  const Eigen::ArrayXd row_dot = (gxhat * xhat_.array()).rowwise().mean();
  Eigen::ArrayXXd gx = gxhat;
  gx.colwise() -= row_mean;
  gx -= xhat_.array().colwise() * row_dot;
  gx.colwise() *= inv_std_.array();
  return gx.matrix();
}

void LayerNorm::collect(std::vector<ParamRef>& out) {
  out.push_back({&gamma, &ggamma});
  out.push_back({&beta, &gbeta});
}

void Sequential::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
}

Eigen::MatrixXd Sequential::forward(const Eigen::MatrixXd& x, bool train,
                                    std::mt19937_64* rng) {
  Eigen::MatrixXd h = x;
  for (auto& layer : layers_) h = layer->forward(h, train, rng);
  return h;
}

Eigen::MatrixXd Sequential::backward(const Eigen::MatrixXd& gout) {
  Eigen::MatrixXd g = gout;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->backward(g);
  }
  return g;
}

void Sequential::collect(std::vector<ParamRef>& out) {
  for (auto& layer : layers_) layer->collect(out);
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  const Eigen::MatrixXd shifted =
      logits.colwise() - logits.rowwise().maxCoeff();
  const Eigen::MatrixXd e = shifted.array().exp().matrix();
  const Eigen::VectorXd z = e.rowwise().sum();
  return (e.array().colwise() / z.array()).matrix();
}

LossGrad cross_entropy(const Eigen::MatrixXd& logits,
                       const Eigen::MatrixXd& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw std::invalid_argument("cross_entropy: shape mismatch");
  }
  if (logits.rows() == 0) throw std::invalid_argument("cross_entropy: empty");
  for (Eigen::Index r = 0; r < targets.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < targets.cols(); ++c) {
      const double v = targets(r, c);
      if (v != 0.0 && v != 1.0) {
        throw std::invalid_argument("cross_entropy: target row not one-hot");
      }
      sum += v;
    }
    if (sum != 1.0) {
      throw std::invalid_argument("cross_entropy: target row not one-hot");
    }
  }
  const Eigen::MatrixXd p = softmax_rows(logits);
  const double rows = static_cast<double>(logits.rows());
  LossGrad out;
  out.loss = -((p.array() * targets.array()).rowwise().sum().log()).mean();
  out.grad = (p - targets) / rows;
  return out;
}

LossGrad mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("mse: shape mismatch");
  }
  const double count = static_cast<double>(pred.size());
  LossGrad out;
  out.loss = (pred - target).array().square().sum() / count;
  out.grad = 2.0 * (pred - target) / count;
  return out;
}

Eigen::MatrixXd one_hot(const std::vector<int>& indices, int k) {
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(indices.size()), k);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0 || indices[r] >= k) {
      throw std::invalid_argument("one_hot: index out of range");
    }
    out(static_cast<Eigen::Index>(r), indices[r]) = 1.0;
  }
  return out;
}

Eigen::RowVectorXd time_embedding(double t, int dim) {
  if (dim < 2 || dim % 2 != 0) {
    throw std::invalid_argument("time_embedding: dim must be even and >= 2");
  }
  Eigen::RowVectorXd emb(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq =
        std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    emb[2 * i] = std::sin(t * freq);
    emb[2 * i + 1] = std::cos(t * freq);
  }
  return emb;
}

Adam::Adam(std::vector<ParamRef> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const ParamRef& p : params_) {
    m_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Eigen::MatrixXd& g = *params_[i].grad;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXXd mhat = m_[i].array() / bc1;
    const Eigen::ArrayXXd vhat = v_[i].array() / bc2;
    Eigen::MatrixXd& p = *params_[i].value;
    p.array() -= cfg_.lr * (mhat / (vhat.sqrt() + cfg_.eps) +
                            cfg_.weight_decay * p.array());
  }
}

void Adam::zero_grad() {
  for (ParamRef& p : params_) p.grad->setZero();
}

MlpDenoiser::MlpDenoiser(MlpDenoiserConfig cfg, std::mt19937_64& rng) : cfg_(cfg) {
  if (cfg.in_width < 1 || cfg.out_width < 1) {
    throw std::invalid_argument("MlpDenoiser: bad widths");
  }
  const int h = cfg.hidden;
  auto mlp_in = [&](int in) {
    net_.add(std::make_unique<SiLU>());
    net_.add(std::make_unique<ReLU>());
    net_.add(std::make_unique<Linear>(in, h, rng));
  };
  mlp_in(cfg.in_width + cfg.time_dim);
  for (int blk = 0; blk < cfg.blocks; ++blk) {
    net_.add(std::make_unique<LayerNorm>(h));
    mlp_in(h);
    net_.add(std::make_unique<Dropout>(cfg.dropout));
    net_.add(std::make_unique<Linear>(h, h, rng));
    net_.add(std::make_unique<SiLU>());
    net_.add(std::make_unique<Dropout>(cfg.dropout));
    net_.add(std::make_unique<Linear>(h, h, rng));
    net_.add(std::make_unique<LayerNorm>(h));
  }
  net_.add(std::make_unique<Linear>(h, h, rng));
  net_.add(std::make_unique<SiLU>());
  net_.add(std::make_unique<Linear>(h, cfg.out_width, rng));
  net_.collect(params_);  // layers live on the heap, refs stay valid on move
}

Eigen::MatrixXd MlpDenoiser::forward(const Eigen::MatrixXd& x, double t,
                                     bool train, std::mt19937_64* rng) {
  check_width(x, cfg_.in_width, "MlpDenoiser");
  Eigen::MatrixXd full(x.rows(), cfg_.in_width + cfg_.time_dim);
  full.leftCols(cfg_.in_width) = x;
  full.rightCols(cfg_.time_dim) =
      time_embedding(t, cfg_.time_dim).replicate(x.rows(), 1);
  return net_.forward(full, train, rng);
}

Eigen::MatrixXd MlpDenoiser::backward(const Eigen::MatrixXd& gout) {
  return net_.backward(gout).leftCols(cfg_.in_width);
}

std::vector<ParamRef> MlpDenoiser::parameters() { return params_; }

std::vector<double> MlpDenoiser::flatten() const {
  std::vector<double> flat;
  for (const ParamRef& p : params_) {
    flat.insert(flat.end(), p.value->data(), p.value->data() + p.value->size());
  }
  return flat;
}

void MlpDenoiser::unflatten(const std::vector<double>& flat) {
  std::size_t at = 0;
  for (const ParamRef& p : params_) {
    const std::size_t count = static_cast<std::size_t>(p.value->size());
    if (at + count > flat.size()) {
      throw std::invalid_argument("MlpDenoiser: checkpoint too short");
    }
    std::copy(flat.begin() + static_cast<long>(at),
              flat.begin() + static_cast<long>(at + count), p.value->data());
    at += count;
  }
  if (at != flat.size()) {
    throw std::invalid_argument("MlpDenoiser: checkpoint size mismatch");
  }
}

}  // namespace hegex
