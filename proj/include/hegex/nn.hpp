#pragma once

#include <Eigen/Dense>

#include <memory>
#include <random>
#include <vector>

namespace hegex {

// Trainable parameter with its gradient accumulator. Biases and norm
// scales are stored as 1 x n matrices so one optimizer handles all.
struct ParamRef {
  Eigen::MatrixXd* value = nullptr;
  Eigen::MatrixXd* grad = nullptr;
};

struct Layer {
  virtual ~Layer() = default;
  // Caches whatever backward needs; rng only consulted when training.
  virtual Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool train,
                                  std::mt19937_64* rng) = 0;
  virtual Eigen::MatrixXd backward(const Eigen::MatrixXd& gout) = 0;
  virtual void collect(std::vector<ParamRef>& out) { (void)out; }
};

class Linear : public Layer {
 public:
  Linear(int in, int out, std::mt19937_64& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool train,
                          std::mt19937_64* rng) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& gout) override;
  void collect(std::vector<ParamRef>& out) override;

  Eigen::MatrixXd w, gw;  // in x out
  Eigen::MatrixXd b, gb;  // 1 x out

 private:
  Eigen::MatrixXd x_;
};

class SiLU : public Layer {
 public:
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool train,
                          std::mt19937_64* rng) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& gout) override;

 private:
  Eigen::MatrixXd x_;
};

class ReLU : public Layer {
 public:
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool train,
                          std::mt19937_64* rng) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& gout) override;

 private:
  Eigen::MatrixXd x_;
};

class Dropout : public Layer {
 public:
  explicit Dropout(double p);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool train,
                          std::mt19937_64* rng) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& gout) override;

 private:
  double p_;
  Eigen::MatrixXd mask_;
  bool active_ = false;
};

class LayerNorm : public Layer {
 public:
  explicit LayerNorm(int dim, double eps = 1e-5);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool train,
                          std::mt19937_64* rng) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& gout) override;
  void collect(std::vector<ParamRef>& out) override;

  Eigen::MatrixXd gamma, ggamma;  // 1 x dim
  Eigen::MatrixXd beta, gbeta;

 private:
  double eps_;
  Eigen::MatrixXd xhat_;
  Eigen::VectorXd inv_std_;
};

class Sequential : public Layer {
 public:
  void add(std::unique_ptr<Layer> layer);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool train,
                          std::mt19937_64* rng) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& gout) override;
  void collect(std::vector<ParamRef>& out) override;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

struct LossGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // w.r.t. the first argument
};

// Mean over rows of -log softmax(logits)[target class]. Targets must be
// one-hot rows; gradient is (softmax - target) / rows.
LossGrad cross_entropy(const Eigen::MatrixXd& logits,
                       const Eigen::MatrixXd& targets);

// Mean over all entries of (pred - target)^2.
LossGrad mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

Eigen::MatrixXd one_hot(const std::vector<int>& indices, int k);

// Sinusoidal position encoding of a diffusion step; dim must be even.
Eigen::RowVectorXd time_embedding(double t, int dim);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Bias-corrected Adam with decoupled weight decay.
class Adam {
 public:
  Adam(std::vector<ParamRef> params, AdamConfig cfg);
  void step();
  void zero_grad();
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  std::vector<ParamRef> params_;
  std::vector<Eigen::MatrixXd> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

struct MlpDenoiserConfig {
  int in_width = 0;    // without the time embedding
  int out_width = 0;
  int hidden = 128;
  int blocks = 2;
  double dropout = 0.0;
  int time_dim = 16;
};

// Denoising MLP: an input stage Lin(ReLU(SiLU(x))), a stack of blocks
// LN -> Lin(Drop(SiLU(Lin(Drop(Lin(ReLU(SiLU(.)))))))) -> LN, and the
// output stage Lin(SiLU(Lin(.))). The diffusion step enters as a
// sinusoidal embedding concatenated to the input.
class MlpDenoiser {
 public:
  MlpDenoiser(MlpDenoiserConfig cfg, std::mt19937_64& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, double t, bool train,
                          std::mt19937_64* rng);
  // Gradient w.r.t. x (time-embedding columns dropped). Parameter
  // gradients accumulate into the refs from parameters().
  Eigen::MatrixXd backward(const Eigen::MatrixXd& gout);

  std::vector<ParamRef> parameters();
  const MlpDenoiserConfig& config() const { return cfg_; }

  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);

 private:
  MlpDenoiserConfig cfg_;
  Sequential net_;
  std::vector<ParamRef> params_;
};

}  // namespace hegex
