#include "hegex/hetero_gnn.hpp"

#include <algorithm>
#include <stdexcept>

namespace hegex {

namespace {

std::string rel_key(const std::string& src, const std::string& dst) {
  return src + ">" + dst;
}

}  // namespace

HeteroGnn::HeteroGnn(const DatasetSpec& spec,
                     const std::map<std::string, int>& widths,
                     HeteroGnnConfig cfg, std::mt19937_64& rng)
    : spec_(spec), cfg_(cfg), widths_(widths) {
  spec_.validate();
  head_ = std::make_unique<Linear>(cfg.hidden, spec.num_classes, rng);
  for (const std::string& type : spec_.metagraph.types) {
    const auto it = widths_.find(type);
    const int w = it == widths_.end() ? 0 : it->second;
    // featureless types read a scaled-degree channel
    encoders_.emplace(type, Linear(std::max(w, 1), cfg.hidden, rng));
  }
  layers_.resize(cfg.layers);
  for (LayerParams& layer : layers_) {
    for (const std::string& type : spec_.metagraph.types) {
      layer.self.emplace(type, Linear(cfg.hidden, cfg.hidden, rng));
    }
    for (const auto& [a, b] : spec_.metagraph.type_edges) {
      layer.relation.emplace(rel_key(a, b), Linear(cfg.hidden, cfg.hidden, rng));
      if (a != b) {
        layer.relation.emplace(rel_key(b, a),
                               Linear(cfg.hidden, cfg.hidden, rng));
      }
    }
  }
  for (auto& [type, enc] : encoders_) enc.collect(params_);
  for (LayerParams& layer : layers_) {
    for (auto& [type, lin] : layer.self) lin.collect(params_);
    for (auto& [key, lin] : layer.relation) lin.collect(params_);
  }
  head_->collect(params_);
}

void HeteroGnn::build_cache(const HeteroGraph& g) {
  cache_ = Cache{};
  cache_.c = compact(g);
  const CompactGraph& c = cache_.c;
  const int n = c.n();
  for (int v = 0; v < n; ++v) {
    cache_.rows_by_type[c.type_names[c.type_ids[v]]].push_back(v);
  }
  if (layers_.empty()) return;
  for (const auto& [key, lin] : layers_.front().relation) {
    const auto gt = key.find('>');
    const std::string src = key.substr(0, gt);
    const std::string dst = key.substr(gt + 1);
    auto& lists = cache_.rel_neighbors[key];
    lists.assign(n, {});
    for (int v = 0; v < n; ++v) {
      if (c.type_names[c.type_ids[v]] != dst) continue;
      for (int u : c.adj[v]) {
        if (c.type_names[c.type_ids[u]] == src) lists[v].push_back(u);
      }
    }
  }
}

Eigen::MatrixXd HeteroGnn::forward_states(const HeteroGraph& g) {
  build_cache(g);
  const CompactGraph& c = cache_.c;
  const int n = c.n();
  const int hidden = cfg_.hidden;

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, hidden);
  for (auto& [type, rows] : cache_.rows_by_type) {
    auto enc_it = encoders_.find(type);
    if (enc_it == encoders_.end()) {
      throw std::invalid_argument("HeteroGnn: unknown node type " + type);
    }
    const int w = widths_.count(type) ? widths_.at(type) : 0;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), std::max(w, 1));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const int v = rows[i];
      if (w > 0) {
        const auto row = g.feature_row(c.ids[v]);
        if (!row || row->size() != w) {
          throw std::invalid_argument("HeteroGnn: missing feature row for type " +
                                      type);
        }
        x.row(static_cast<Eigen::Index>(i)) = *row;
      } else {
        x(static_cast<Eigen::Index>(i), 0) = c.degree(v) / 10.0;
      }
    }
    const Eigen::MatrixXd out = enc_it->second.forward(x, false, nullptr);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      h.row(rows[i]) = out.row(static_cast<Eigen::Index>(i));
    }
  }

  cache_.h.push_back(h);
  for (LayerParams& layer : layers_) {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, hidden);
    for (auto& [type, lin] : layer.self) {
      const auto rows_it = cache_.rows_by_type.find(type);
      if (rows_it == cache_.rows_by_type.end()) continue;
      Eigen::MatrixXd masked = Eigen::MatrixXd::Zero(n, hidden);
      for (int v : rows_it->second) masked.row(v) = h.row(v);
      const Eigen::MatrixXd out = lin.forward(masked, false, nullptr);
      for (int v : rows_it->second) z.row(v) += out.row(v);
    }
    for (auto& [key, lin] : layer.relation) {
      const auto& lists = cache_.rel_neighbors.at(key);
      Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(n, hidden);
      for (int v = 0; v < n; ++v) {
        if (lists[v].empty()) continue;
        for (int u : lists[v]) pooled.row(v) += h.row(u);
        pooled.row(v) /= static_cast<double>(lists[v].size());
      }
      const Eigen::MatrixXd out = lin.forward(pooled, false, nullptr);
      for (int v = 0; v < n; ++v) {
        if (!lists[v].empty()) z.row(v) += out.row(v);
      }
    }
    cache_.z.push_back(z);
    h = z.cwiseMax(0.0);
    cache_.h.push_back(h);
  }
  return h;
}

void HeteroGnn::backward_states(const Eigen::MatrixXd& g_states) {
  const CompactGraph& c = cache_.c;
  const int n = c.n();
  Eigen::MatrixXd g = g_states;
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    LayerParams& layer = layers_[static_cast<std::size_t>(l)];
    const Eigen::MatrixXd gz =
        (g.array() * (cache_.z[static_cast<std::size_t>(l)].array() > 0.0)
                         .cast<double>())
            .matrix();
    Eigen::MatrixXd g_prev = Eigen::MatrixXd::Zero(n, cfg_.hidden);
    for (auto& [type, lin] : layer.self) {
      const auto rows_it = cache_.rows_by_type.find(type);
      if (rows_it == cache_.rows_by_type.end()) continue;
      Eigen::MatrixXd masked = Eigen::MatrixXd::Zero(n, cfg_.hidden);
      for (int v : rows_it->second) masked.row(v) = gz.row(v);
      const Eigen::MatrixXd gx = lin.backward(masked);
      for (int v : rows_it->second) g_prev.row(v) += gx.row(v);
    }
    for (auto& [key, lin] : layer.relation) {
      const auto& lists = cache_.rel_neighbors.at(key);
      Eigen::MatrixXd masked = Eigen::MatrixXd::Zero(n, cfg_.hidden);
      for (int v = 0; v < n; ++v) {
        if (!lists[v].empty()) masked.row(v) = gz.row(v);
      }
      const Eigen::MatrixXd gp = lin.backward(masked);
      for (int v = 0; v < n; ++v) {
        if (lists[v].empty()) continue;
        const double scale = 1.0 / static_cast<double>(lists[v].size());
        for (int u : lists[v]) g_prev.row(u) += gp.row(v) * scale;
      }
    }
    g = std::move(g_prev);
  }
  for (auto& [type, rows] : cache_.rows_by_type) {
    Eigen::MatrixXd gathered(static_cast<Eigen::Index>(rows.size()), cfg_.hidden);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      gathered.row(static_cast<Eigen::Index>(i)) = g.row(rows[i]);
    }
    encoders_.at(type).backward(gathered);
  }
}

Eigen::VectorXd HeteroGnn::predict_node(const HeteroGraph& g, NodeId id) {
  if (!g.has_node(id)) {
    throw std::invalid_argument("predict_node: unknown node id");
  }
  if (g.type_of(id) != spec_.classified_type) {
    throw std::invalid_argument("predict_node: node is not of the classified type");
  }
  const Eigen::MatrixXd states = forward_states(g);
  const int v = cache_.c.index.at(id);
  const Eigen::MatrixXd logits = head_->forward(states.row(v), false, nullptr);
  return softmax_rows(logits).row(0).transpose();
}

Eigen::VectorXd HeteroGnn::predict_graph(const HeteroGraph& g) {
  const Eigen::MatrixXd states = forward_states(g);
  const Eigen::MatrixXd pooled = states.colwise().mean();
  const Eigen::MatrixXd logits = head_->forward(pooled, false, nullptr);
  return softmax_rows(logits).row(0).transpose();
}

std::vector<ParamRef> HeteroGnn::parameters() { return params_; }

std::vector<double> HeteroGnn::flatten() const {
  std::vector<double> flat;
  for (const ParamRef& p : params_) {
    flat.insert(flat.end(), p.value->data(), p.value->data() + p.value->size());
  }
  return flat;
}

void HeteroGnn::unflatten(const std::vector<double>& flat) {
  std::size_t at = 0;
  for (const ParamRef& p : params_) {
    const std::size_t count = static_cast<std::size_t>(p.value->size());
    if (at + count > flat.size()) {
      throw std::invalid_argument("HeteroGnn: checkpoint too short");
    }
    std::copy(flat.begin() + static_cast<long>(at),
              flat.begin() + static_cast<long>(at + count), p.value->data());
    at += count;
  }
  if (at != flat.size()) {
    throw std::invalid_argument("HeteroGnn: checkpoint size mismatch");
  }
}

HeteroGnn train_gnn(const std::vector<HeteroGraph>& graphs,
                    const DatasetSpec& spec, const HeteroGnnConfig& cfg,
                    std::mt19937_64& rng, GnnTrainResult* result) {
  if (cfg.patience < 1) throw std::invalid_argument("train_gnn: patience < 1");
  if (graphs.empty()) throw std::invalid_argument("train_gnn: no graphs");

  std::map<std::string, int> widths;
  for (const std::string& type : spec.metagraph.types) widths[type] = 0;
  for (const HeteroGraph& g : graphs) {
    for (const auto& [type, fm] : g.features) widths[type] = fm.width();
  }

  struct Item {
    int graph = 0;
    NodeId node = -1;  // -1 for graph-level items
    int label = 0;
  };
  std::vector<Item> items;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const HeteroGraph& g = graphs[gi];
    if (spec.task == Task::GraphClassification) {
      if (g.graph_label) items.push_back({static_cast<int>(gi), -1, *g.graph_label});
    } else {
      for (const auto& [id, type] : g.nodes()) {
        if (type != spec.classified_type) continue;
        const auto it = g.class_labels.find(id);
        if (it != g.class_labels.end()) {
          items.push_back({static_cast<int>(gi), id, it->second});
        }
      }
    }
  }
  if (items.empty()) {
    throw std::invalid_argument("train_gnn: no labeled examples of the classified type");
  }

  std::shuffle(items.begin(), items.end(), rng);
  std::size_t val_count =
      static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(items.size()));
  if (cfg.val_fraction > 0.0 && val_count == 0) val_count = 1;
  if (val_count >= items.size()) val_count = items.size() - 1;
  const std::vector<Item> val_items(items.end() - static_cast<long>(val_count),
                                    items.end());
  items.resize(items.size() - val_count);

  HeteroGnn model(spec, widths, cfg, rng);
  Adam opt(model.parameters(), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

  // items grouped by graph so each graph runs one forward/backward pass
  std::map<int, std::vector<Item>> by_graph;
  for (const Item& item : items) by_graph[item.graph].push_back(item);

  auto accuracy = [&](const std::vector<Item>& subset) {
    if (subset.empty()) return 0.0;
    int hits = 0;
    for (const Item& item : subset) {
      const Eigen::VectorXd p =
          item.node < 0 ? model.predict_graph(graphs[static_cast<std::size_t>(item.graph)])
                        : model.predict_node(graphs[static_cast<std::size_t>(item.graph)],
                                             item.node);
      Eigen::Index best;
      p.maxCoeff(&best);
      hits += static_cast<int>(best) == item.label;
    }
    return static_cast<double>(hits) / static_cast<double>(subset.size());
  };

  std::vector<double> best_params = model.flatten();
  double best_score = -1.0;
  int best_epoch = -1;
  int stale = 0;
  std::vector<double> history;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    opt.zero_grad();
    for (const auto& [gi, group] : by_graph) {
      const HeteroGraph& g = graphs[static_cast<std::size_t>(gi)];
      const Eigen::MatrixXd states = model.forward_states(g);
      const int n = static_cast<int>(states.rows());

      Eigen::MatrixXd inputs;
      std::vector<int> labels;
      std::vector<int> anchor_rows;
      if (spec.task == Task::GraphClassification) {
        inputs = states.colwise().mean();
        labels.push_back(group.front().label);
      } else {
        const CompactGraph c = compact(g);
        inputs.resize(static_cast<Eigen::Index>(group.size()), states.cols());
        for (std::size_t i = 0; i < group.size(); ++i) {
          const int row = c.index.at(group[i].node);
          anchor_rows.push_back(row);
          inputs.row(static_cast<Eigen::Index>(i)) = states.row(row);
          labels.push_back(group[i].label);
        }
      }
      const Eigen::MatrixXd logits = model.head().forward(inputs, false, nullptr);
      const LossGrad lg = cross_entropy(logits, one_hot(labels, spec.num_classes));
      const Eigen::MatrixXd g_inputs = model.head().backward(lg.grad);

      Eigen::MatrixXd g_states = Eigen::MatrixXd::Zero(n, states.cols());
      if (spec.task == Task::GraphClassification) {
        const Eigen::RowVectorXd pooled_grad =
            g_inputs.row(0) / static_cast<double>(n);
        g_states.rowwise() = pooled_grad;
      } else {
        for (std::size_t i = 0; i < group.size(); ++i) {
          g_states.row(anchor_rows[i]) += g_inputs.row(static_cast<Eigen::Index>(i));
        }
      }
      model.backward_states(g_states);
    }
    opt.step();

    const double score = accuracy(val_items.empty() ? items : val_items);
    history.push_back(score);
    if (score > best_score) {
      best_score = score;
      best_epoch = epoch;
      best_params = model.flatten();
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }

  model.unflatten(best_params);
  if (result) {
    result->val_history = std::move(history);
    result->best_score = best_score;
    result->best_epoch = best_epoch;
  }
  return model;
}

}  // namespace hegex
