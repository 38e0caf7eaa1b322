#pragma once

#include "hegex/datasets.hpp"
#include "hegex/nn.hpp"
#include "hegex/schedule.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hegex {

enum class GeneratorKind { Discrete, Continuous, None };

struct GeneratorEntry {
  std::string type;
  std::optional<int> class_index;  // empty = one generator for all rows
  GeneratorKind kind = GeneratorKind::None;
  int width = 0;
  std::vector<double> alphabet;  // discrete only
};

// One entry per class for the classified type, one entry for every other
// featured type; featureless types contribute nothing.
struct FeatureGeneratorPlan {
  std::vector<GeneratorEntry> entries;
};

FeatureGeneratorPlan plan_generators(const DatasetSpec& spec,
                                     const std::vector<HeteroGraph>& graphs);

// Feature rows of one node type across the training graphs, optionally
// restricted to a class (node labels for node tasks, graph labels for
// graph tasks).
Eigen::MatrixXd collect_rows(const std::vector<HeteroGraph>& graphs,
                             const std::string& type,
                             std::optional<int> class_index, Task task);

struct DiscreteFeatureConfig {
  int T = 100;
  int hidden = 128;
  int blocks = 2;
  double dropout = 0.0;
  int time_dim = 16;
  double lr = 0.05;
  double weight_decay = 1e-2;
  int steps = 2000;
};

// Diffusion over rows whose cells live in a finite alphabet: forward
// noising through per-column marginal transitions, one-hot encoding into
// an MLP that is trained to put probability on the clean cells.
class DiscreteFeatureModel {
 public:
  DiscreteFeatureModel(int width, std::vector<double> alphabet,
                       DiscreteFeatureConfig cfg, std::mt19937_64& rng);

  int width() const { return d_; }
  int alphabet_size() const { return k_; }
  const std::vector<double>& alphabet() const { return alphabet_; }
  const DiscreteFeatureConfig& config() const { return cfg_; }

  // Per-column predicted distributions (width x k) for the previous step.
  Eigen::MatrixXd predict(const Eigen::RowVectorXd& x_t, int t);

  MlpDenoiser& net() { return net_; }
  const MlpDenoiser& net() const { return net_; }
  NoiseSchedule schedule;
  Eigen::MatrixXd priors;  // width x k, per-column marginals
  double final_loss = 0.0;

  Eigen::MatrixXd encode(const Eigen::RowVectorXd& row) const;  // width x k
  Eigen::RowVectorXd to_indices(const Eigen::RowVectorXd& row) const;

 private:
  int d_, k_;
  std::vector<double> alphabet_;
  DiscreteFeatureConfig cfg_;
  MlpDenoiser net_;
};

Eigen::RowVectorXd forward_noise_features(const Eigen::RowVectorXd& x0, int t,
                                          const DiscreteFeatureModel& model,
                                          std::mt19937_64& rng);

DiscreteFeatureModel train_discrete(const Eigen::MatrixXd& rows,
                                    const std::vector<double>& alphabet,
                                    const DiscreteFeatureConfig& cfg,
                                    std::mt19937_64& rng);

Eigen::MatrixXd sample_discrete(DiscreteFeatureModel& model, int count,
                                std::mt19937_64& rng);

// Monte-Carlo estimate of E[log p(x0 | x_t)] per cell on held-out rows.
double reconstruction_loss(DiscreteFeatureModel& model,
                           const Eigen::MatrixXd& validation,
                           std::mt19937_64& rng, int passes = 8);

struct ContinuousFeatureConfig {
  int T = 1000;
  int hidden = 128;
  int blocks = 2;
  double dropout = 0.0;
  int time_dim = 16;
  double lr = 0.002;
  double weight_decay = 1e-4;
  int steps = 3000;
  double beta_min = 1e-4;
  double beta_max = 0.02;
};

// Gaussian diffusion with noise prediction on standardized columns.
class ContinuousFeatureModel {
 public:
  ContinuousFeatureModel(int width, ContinuousFeatureConfig cfg,
                         std::mt19937_64& rng);

  int width() const { return d_; }
  const ContinuousFeatureConfig& config() const { return cfg_; }

  MlpDenoiser& net() { return net_; }
  const MlpDenoiser& net() const { return net_; }
  Eigen::RowVectorXd mean, std;  // per-column standardization
  Eigen::VectorXd beta, alpha_bar;
  double final_loss = 0.0;

 private:
  int d_;
  ContinuousFeatureConfig cfg_;
  MlpDenoiser net_;
};

ContinuousFeatureModel train_continuous(const Eigen::MatrixXd& rows,
                                        const ContinuousFeatureConfig& cfg,
                                        std::mt19937_64& rng);

Eigen::MatrixXd sample_continuous(ContinuousFeatureModel& model, int count,
                                  std::mt19937_64& rng);

// Nearest-value mapping onto the alphabet; a binary alphabet splits at
// the threshold instead.
Eigen::MatrixXd discretize(const Eigen::MatrixXd& rows,
                           const std::vector<double>& alphabet,
                           double threshold = 0.5);

}  // namespace hegex
