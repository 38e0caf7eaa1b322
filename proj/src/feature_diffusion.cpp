#include "hegex/feature_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hegex {

namespace {

const FeatureMatrix* find_features(const std::vector<HeteroGraph>& graphs,
                                   const std::string& type) {
  for (const HeteroGraph& g : graphs) {
    const auto it = g.features.find(type);
    if (it != g.features.end()) return &it->second;
  }
  return nullptr;
}

bool matches_class(const HeteroGraph& g, NodeId id, int cls, Task task) {
  if (task == Task::GraphClassification) {
    return g.graph_label && *g.graph_label == cls;
  }
  const auto it = g.class_labels.find(id);
  return it != g.class_labels.end() && it->second == cls;
}

}  // namespace

FeatureGeneratorPlan plan_generators(const DatasetSpec& spec,
                                     const std::vector<HeteroGraph>& graphs) {
  spec.validate();
  if (graphs.empty()) throw std::invalid_argument("plan_generators: no graphs");
  FeatureGeneratorPlan plan;
  for (const std::string& type : spec.metagraph.types) {
    const FeatureMatrix* fm = find_features(graphs, type);
    if (!fm || fm->width() == 0) continue;  // featureless type, no generator
    const GeneratorKind kind = fm->kind == FeatureMatrix::Kind::Discrete
                                   ? GeneratorKind::Discrete
                                   : GeneratorKind::Continuous;
    if (type == spec.classified_type) {
      bool labeled = false;
      for (const HeteroGraph& g : graphs) {
        if (spec.task == Task::GraphClassification) {
          labeled = labeled || g.graph_label.has_value();
        } else {
          for (const auto& [id, t] : g.nodes()) {
            if (t == type && g.class_labels.count(id)) {
              labeled = true;
              break;
            }
          }
        }
        if (labeled) break;
      }
      if (!labeled) {
        throw std::invalid_argument(
            "plan_generators: classified type has no labeled nodes");
      }
      for (int c = 0; c < spec.num_classes; ++c) {
        plan.entries.push_back({type, c, kind, fm->width(), fm->alphabet});
      }
    } else {
      plan.entries.push_back({type, std::nullopt, kind, fm->width(), fm->alphabet});
    }
  }
  return plan;
}

Eigen::MatrixXd collect_rows(const std::vector<HeteroGraph>& graphs,
                             const std::string& type,
                             std::optional<int> class_index, Task task) {
  std::vector<Eigen::RowVectorXd> rows;
  for (const HeteroGraph& g : graphs) {
    const auto it = g.features.find(type);
    if (it == g.features.end()) continue;
    for (const auto& [id, t] : g.nodes()) {
      if (t != type) continue;
      if (class_index && !matches_class(g, id, *class_index, task)) continue;
      const auto row = g.feature_row(id);
      if (row) rows.push_back(*row);
    }
  }
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = rows[r];
  return out;
}

DiscreteFeatureModel::DiscreteFeatureModel(int width,
                                           std::vector<double> alphabet,
                                           DiscreteFeatureConfig cfg,
                                           std::mt19937_64& rng)
    : d_(width),
      k_(static_cast<int>(alphabet.size())),
      alphabet_(std::move(alphabet)),
      cfg_(cfg),
      net_({width * k_, width * k_, cfg.hidden, cfg.blocks, cfg.dropout,
            cfg.time_dim},
           rng) {
  if (d_ < 1) throw std::invalid_argument("DiscreteFeatureModel: width < 1");
  if (k_ < 1) throw std::invalid_argument("DiscreteFeatureModel: empty alphabet");
  schedule = cosine_schedule(cfg.T);
  priors = Eigen::MatrixXd::Constant(d_, k_, 1.0 / k_);
}

Eigen::RowVectorXd DiscreteFeatureModel::to_indices(
    const Eigen::RowVectorXd& row) const {
  if (row.size() != d_) {
    throw std::invalid_argument("DiscreteFeatureModel: row width mismatch");
  }
  Eigen::RowVectorXd idx(d_);
  for (int c = 0; c < d_; ++c) {
    const auto it = std::find(alphabet_.begin(), alphabet_.end(), row[c]);
    if (it == alphabet_.end()) {
      throw std::invalid_argument("DiscreteFeatureModel: cell not in alphabet");
    }
    idx[c] = static_cast<double>(it - alphabet_.begin());
  }
  return idx;
}

Eigen::MatrixXd DiscreteFeatureModel::encode(const Eigen::RowVectorXd& row) const {
  const Eigen::RowVectorXd idx = to_indices(row);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d_, k_);
  for (int c = 0; c < d_; ++c) out(c, static_cast<int>(idx[c])) = 1.0;
  return out;
}

Eigen::MatrixXd DiscreteFeatureModel::predict(const Eigen::RowVectorXd& x_t,
                                              int t) {
  const Eigen::MatrixXd hot = encode(x_t);
  Eigen::MatrixXd input(1, d_ * k_);
  for (int c = 0; c < d_; ++c) input.block(0, c * k_, 1, k_) = hot.row(c);
  const Eigen::MatrixXd logits =
      net_.forward(input, static_cast<double>(t), false, nullptr);
  Eigen::MatrixXd per_column(d_, k_);
  for (int c = 0; c < d_; ++c) per_column.row(c) = logits.block(0, c * k_, 1, k_);
  return softmax_rows(per_column);
}

Eigen::RowVectorXd forward_noise_features(const Eigen::RowVectorXd& x0, int t,
                                          const DiscreteFeatureModel& model,
                                          std::mt19937_64& rng) {
  if (t < 0 || t > model.schedule.T) {
    throw std::invalid_argument("forward_noise_features: t outside [0,T]");
  }
  if (t == 0) return x0;
  const Eigen::RowVectorXd idx = model.to_indices(x0);
  const double abar = model.schedule.alpha_bar[t];
  Eigen::RowVectorXd out(model.width());
  for (int c = 0; c < model.width(); ++c) {
    const Eigen::MatrixXd qbar =
        marginal_transition_bar(abar, model.priors.row(c).transpose());
    const int next =
        sample_categorical(qbar.row(static_cast<int>(idx[c])).transpose(), rng);
    out[c] = model.alphabet()[static_cast<std::size_t>(next)];
  }
  return out;
}

DiscreteFeatureModel train_discrete(const Eigen::MatrixXd& rows,
                                    const std::vector<double>& alphabet,
                                    const DiscreteFeatureConfig& cfg,
                                    std::mt19937_64& rng) {
  if (rows.rows() == 0) throw std::invalid_argument("train_discrete: no rows");
  DiscreteFeatureModel model(static_cast<int>(rows.cols()), alphabet, cfg, rng);
  const int d = model.width();
  const int k = model.alphabet_size();

  model.priors.setZero();
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const Eigen::RowVectorXd idx = model.to_indices(rows.row(r));
    for (int c = 0; c < d; ++c) model.priors(c, static_cast<int>(idx[c])) += 1.0;
  }
  model.priors /= static_cast<double>(rows.rows());

  Adam opt(model.net().parameters(),
           {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  std::uniform_int_distribution<Eigen::Index> pick_row(0, rows.rows() - 1);
  std::uniform_int_distribution<int> pick_t(1, cfg.T);

  for (int step = 0; step < cfg.steps; ++step) {
    const Eigen::RowVectorXd x0 = rows.row(pick_row(rng));
    const int t = pick_t(rng);
    const Eigen::RowVectorXd xt = forward_noise_features(x0, t, model, rng);

    const Eigen::MatrixXd hot = model.encode(xt);
    Eigen::MatrixXd input(1, d * k);
    for (int c = 0; c < d; ++c) input.block(0, c * k, 1, k) = hot.row(c);
    const Eigen::MatrixXd logits =
        model.net().forward(input, static_cast<double>(t), true, &rng);

    Eigen::MatrixXd per_column(d, k);
    for (int c = 0; c < d; ++c) per_column.row(c) = logits.block(0, c * k, 1, k);
    const LossGrad lg = cross_entropy(per_column, model.encode(x0));
    model.final_loss = lg.loss;

    Eigen::MatrixXd flat_grad(1, d * k);
    for (int c = 0; c < d; ++c) flat_grad.block(0, c * k, 1, k) = lg.grad.row(c);
    opt.zero_grad();
    model.net().backward(flat_grad);
    opt.step();
  }
  return model;
}

Eigen::MatrixXd sample_discrete(DiscreteFeatureModel& model, int count,
                                std::mt19937_64& rng) {
  if (count < 0) throw std::invalid_argument("sample_discrete: count < 0");
  const int d = model.width();
  Eigen::MatrixXd out(count, d);
  for (int s = 0; s < count; ++s) {
    Eigen::RowVectorXd x(d);
    for (int c = 0; c < d; ++c) {
      const int idx = sample_categorical(model.priors.row(c).transpose(), rng);
      x[c] = model.alphabet()[static_cast<std::size_t>(idx)];
    }
    for (int t = model.schedule.T; t >= 1; --t) {
      const Eigen::MatrixXd p = model.predict(x, t);
      const Eigen::RowVectorXd cur = model.to_indices(x);
      const double a_t = model.schedule.alpha[t];
      const double abar_t = model.schedule.alpha_bar[t];
      const double abar_prev = model.schedule.alpha_bar[t - 1];
      for (int c = 0; c < d; ++c) {
        const Eigen::VectorXd prior = model.priors.row(c).transpose();
        const Eigen::VectorXd post = posterior_row(
            p.row(c).transpose(), static_cast<int>(cur[c]),
            marginal_transition(a_t, prior),
            marginal_transition_bar(abar_prev, prior),
            marginal_transition_bar(abar_t, prior));
        const int idx = sample_categorical(post, rng);
        x[c] = model.alphabet()[static_cast<std::size_t>(idx)];
      }
    }
    out.row(s) = x;
  }
  return out;
}

double reconstruction_loss(DiscreteFeatureModel& model,
                           const Eigen::MatrixXd& validation,
                           std::mt19937_64& rng, int passes) {
  if (validation.rows() == 0) {
    throw std::invalid_argument("reconstruction_loss: empty validation set");
  }
  std::uniform_int_distribution<int> pick_t(1, model.schedule.T);
  double acc = 0.0;
  long count = 0;
  for (int pass = 0; pass < passes; ++pass) {
    for (Eigen::Index r = 0; r < validation.rows(); ++r) {
      const Eigen::RowVectorXd x0 = validation.row(r);
      const int t = pick_t(rng);
      const Eigen::RowVectorXd xt = forward_noise_features(x0, t, model, rng);
      const Eigen::MatrixXd p = model.predict(xt, t);
      const Eigen::RowVectorXd idx = model.to_indices(x0);
      double row_ll = 0.0;
      for (int c = 0; c < model.width(); ++c) {
        row_ll += std::log(std::max(p(c, static_cast<int>(idx[c])), 1e-300));
      }
      acc += row_ll / model.width();
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

ContinuousFeatureModel::ContinuousFeatureModel(int width,
                                               ContinuousFeatureConfig cfg,
                                               std::mt19937_64& rng)
    : d_(width),
      cfg_(cfg),
      net_({width, width, cfg.hidden, cfg.blocks, cfg.dropout, cfg.time_dim},
           rng) {
  if (d_ < 1) throw std::invalid_argument("ContinuousFeatureModel: width < 1");
  if (cfg.T < 1) throw std::invalid_argument("ContinuousFeatureModel: T < 1");
  mean = Eigen::RowVectorXd::Zero(d_);
  std = Eigen::RowVectorXd::Ones(d_);
  beta = Eigen::VectorXd::Zero(cfg.T + 1);
  alpha_bar = Eigen::VectorXd::Ones(cfg.T + 1);
  for (int t = 1; t <= cfg.T; ++t) {
    beta[t] = cfg.beta_min +
              (cfg.beta_max - cfg.beta_min) * (t - 1) /
                  std::max(1, cfg.T - 1);
    alpha_bar[t] = alpha_bar[t - 1] * (1.0 - beta[t]);
  }
}

ContinuousFeatureModel train_continuous(const Eigen::MatrixXd& rows,
                                        const ContinuousFeatureConfig& cfg,
                                        std::mt19937_64& rng) {
  if (rows.rows() == 0) throw std::invalid_argument("train_continuous: no rows");
  ContinuousFeatureModel model(static_cast<int>(rows.cols()), cfg, rng);
  const int d = model.width();

  model.mean = rows.colwise().mean();
  for (int c = 0; c < d; ++c) {
    const double var = (rows.col(c).array() - model.mean[c]).square().mean();
    model.std[c] = std::max(std::sqrt(var), 1e-3);
  }
  Eigen::MatrixXd z = rows;
  z.rowwise() -= model.mean;
  z.array().rowwise() /= model.std.array();

  Adam opt(model.net().parameters(),
           {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  std::uniform_int_distribution<Eigen::Index> pick_row(0, z.rows() - 1);
  std::uniform_int_distribution<int> pick_t(1, cfg.T);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int step = 0; step < cfg.steps; ++step) {
    const Eigen::RowVectorXd z0 = z.row(pick_row(rng));
    const int t = pick_t(rng);
    Eigen::MatrixXd eps(1, d);
    for (int c = 0; c < d; ++c) eps(0, c) = gauss(rng);
    const double abar = model.alpha_bar[t];
    const Eigen::MatrixXd xt =
        std::sqrt(abar) * z0 + std::sqrt(1.0 - abar) * eps;

    const Eigen::MatrixXd pred =
        model.net().forward(xt, static_cast<double>(t), true, &rng);
    const LossGrad lg = mse(pred, eps);
    model.final_loss = lg.loss;

    opt.zero_grad();
    model.net().backward(lg.grad);
    opt.step();
  }
  return model;
}

Eigen::MatrixXd sample_continuous(ContinuousFeatureModel& model, int count,
                                  std::mt19937_64& rng) {
  if (count < 0) throw std::invalid_argument("sample_continuous: count < 0");
  const int d = model.width();
  const int T = model.config().T;
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd out(count, d);
  for (int s = 0; s < count; ++s) {
    Eigen::MatrixXd x(1, d);
    for (int c = 0; c < d; ++c) x(0, c) = gauss(rng);
    for (int t = T; t >= 1; --t) {
      const Eigen::MatrixXd eps_hat =
          model.net().forward(x, static_cast<double>(t), false, nullptr);
      const double bt = model.beta[t];
      const double at = 1.0 - bt;
      const double abar = model.alpha_bar[t];
      Eigen::MatrixXd mu =
          (x - (bt / std::sqrt(1.0 - abar)) * eps_hat) / std::sqrt(at);
      if (t > 1) {
        const double abar_prev = model.alpha_bar[t - 1];
        const double var = bt * (1.0 - abar_prev) / (1.0 - abar);
        for (int c = 0; c < d; ++c) mu(0, c) += std::sqrt(var) * gauss(rng);
      }
      x = mu;
    }
    out.row(s) = x.row(0);
    out.row(s).array() *= model.std.array();
    out.row(s) += model.mean;
  }
  return out;
}

Eigen::MatrixXd discretize(const Eigen::MatrixXd& rows,
                           const std::vector<double>& alphabet,
                           double threshold) {
  if (alphabet.empty()) throw std::invalid_argument("discretize: empty alphabet");
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  const double lo = *std::min_element(alphabet.begin(), alphabet.end());
  const double hi = *std::max_element(alphabet.begin(), alphabet.end());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      const double v = rows(r, c);
      if (alphabet.size() == 1) {
        out(r, c) = alphabet[0];
      } else if (alphabet.size() == 2) {
        out(r, c) = v >= threshold ? alphabet[1] : alphabet[0];
      } else {
        const double clamped = std::clamp(v, lo, hi);
        double best = alphabet[0];
        double best_gap = std::abs(clamped - alphabet[0]);
        for (double a : alphabet) {
          const double gap = std::abs(clamped - a);
          if (gap < best_gap) {
            best = a;
            best_gap = gap;
          }
        }
        out(r, c) = best;
      }
    }
  }
  return out;
}

}  // namespace hegex
