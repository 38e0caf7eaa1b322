#include "hegex/graph_diffusion.hpp"

#include "hegex/graph_stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hegex {

namespace {

constexpr int kExtraWidth = 7;

int type_index(const std::vector<std::string>& names, const std::string& t) {
  const auto it = std::find(names.begin(), names.end(), t);
  if (it == names.end()) {
    throw std::invalid_argument("unknown node type: " + t);
  }
  return static_cast<int>(it - names.begin());
}

}  // namespace

GraphState encode_graph(const HeteroGraph& g,
                        const std::vector<std::string>& type_names) {
  GraphState s;
  const int n = static_cast<int>(g.node_count());
  s.node_types.reserve(n);
  std::map<NodeId, int> pos;
  for (const auto& [id, type] : g.nodes()) {
    pos[id] = static_cast<int>(s.node_types.size());
    s.node_types.push_back(type_index(type_names, type));
  }
  s.adj = Eigen::MatrixXi::Zero(n, n);
  for (const auto& [u, v] : g.edges()) {
    s.adj(pos.at(u), pos.at(v)) = 1;
    s.adj(pos.at(v), pos.at(u)) = 1;
  }
  return s;
}

HeteroGraph decode_state(const GraphState& s,
                         const std::vector<std::string>& type_names) {
  HeteroGraph g;
  const int n = s.n();
  for (int v = 0; v < n; ++v) {
    g.add_node(v, type_names.at(static_cast<std::size_t>(s.node_types[v])));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (s.adj(i, j)) g.add_edge(i, j);
    }
  }
  return g;
}

TransitionModel estimate_transition_model(
    const std::vector<HeteroGraph>& bucket,
    const std::vector<std::string>& type_names) {
  if (bucket.empty()) {
    throw std::invalid_argument("estimate_transition_model: empty bucket");
  }
  TransitionModel tm;
  tm.m_node = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(type_names.size()));
  double nodes = 0.0;
  double pairs = 0.0;
  double edges = 0.0;
  for (const HeteroGraph& g : bucket) {
    for (const auto& [id, type] : g.nodes()) {
      tm.m_node[type_index(type_names, type)] += 1.0;
    }
    const double n = static_cast<double>(g.node_count());
    nodes += n;
    pairs += n * (n - 1.0) / 2.0;
    edges += static_cast<double>(g.edge_count());
  }
  tm.m_node /= nodes;
  const double p = pairs > 0.0 ? edges / pairs : 0.0;
  tm.m_edge = Eigen::Vector2d(1.0 - p, p);
  return tm;
}

GraphState forward_noise_graph(const GraphState& g0, int t,
                               const NoiseSchedule& schedule,
                               const TransitionModel& tm,
                               std::mt19937_64& rng) {
  if (t < 0 || t > schedule.T) {
    throw std::invalid_argument("forward_noise_graph: t outside [0,T]");
  }
  if (t == 0) return g0;
  const double abar = schedule.alpha_bar[t];
  const Eigen::MatrixXd qbar_node = marginal_transition_bar(abar, tm.m_node);
  const Eigen::MatrixXd qbar_edge = marginal_transition_bar(abar, tm.m_edge);
  GraphState out = g0;
  const int n = g0.n();
  for (int v = 0; v < n; ++v) {
    out.node_types[v] =
        sample_categorical(qbar_node.row(g0.node_types[v]).transpose(), rng);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int e =
          sample_categorical(qbar_edge.row(g0.adj(i, j)).transpose(), rng);
      out.adj(i, j) = e;
      out.adj(j, i) = e;
    }
  }
  return out;
}

Eigen::MatrixXd augment_extra_features(const HeteroGraph& g) {
  const CompactGraph c = compact(g);
  const int n = c.n();
  const CycleCounts cycles = cycle_participation_counts(c);
  const Eigen::VectorXd spectrum = laplacian_spectrum(g);
  Eigen::Vector3d eigs = Eigen::Vector3d::Zero();
  int got = 0;
  for (Eigen::Index i = 0; i < spectrum.size() && got < 3; ++i) {
    if (spectrum[i] > 1e-8) eigs[got++] = spectrum[i];
  }
  Eigen::MatrixXd out(n, kExtraWidth);
  for (int v = 0; v < n; ++v) {
    out(v, 0) = cycles.triangles[v];
    out(v, 1) = cycles.four_cycles[v];
    out(v, 2) = cycles.five_cycles[v];
    out(v, 3) = eigs[0];
    out(v, 4) = eigs[1];
    out(v, 5) = eigs[2];
    out(v, 6) = static_cast<double>(c.degree(v));
  }
  return out;
}

GraphDenoiser::GraphDenoiser(int n, std::vector<std::string> type_names,
                             GraphDiffusionConfig cfg, std::mt19937_64& rng)
    : n_(n),
      type_names_(std::move(type_names)),
      cfg_(cfg),
      in_x_(static_cast<int>(type_names_.size()) + kExtraWidth + cfg.time_dim,
            cfg.hidden, rng),
      in_e_(2, cfg.pair_hidden, rng),
      head_x_(cfg.hidden, static_cast<int>(type_names_.size()), rng),
      head_e_(cfg.pair_hidden, 2, rng) {
  if (n < 1) throw std::invalid_argument("GraphDenoiser: n < 1");
  if (type_names_.empty()) {
    throw std::invalid_argument("GraphDenoiser: no node types");
  }
  for (int l = 0; l < cfg.layers; ++l) {
    layers_.push_back(std::make_unique<GraphTransformerLayer>(
        cfg.hidden, cfg.pair_hidden, cfg.heads, rng));
  }
  schedule = cosine_schedule(cfg.T);
  in_x_.collect(params_);
  in_e_.collect(params_);
  for (auto& layer : layers_) layer->collect(params_);
  head_x_.collect(params_);
  head_e_.collect(params_);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> GraphDenoiser::forward(
    const GraphState& state, int t) {
  const int n = state.n();
  if (n != n_) throw std::invalid_argument("GraphDenoiser: wrong graph size");
  const int k = static_cast<int>(type_names_.size());

  Eigen::MatrixXd x_in = Eigen::MatrixXd::Zero(n, k + kExtraWidth + cfg_.time_dim);
  for (int v = 0; v < n; ++v) x_in(v, state.node_types[v]) = 1.0;
  x_in.middleCols(k, kExtraWidth) =
      augment_extra_features(decode_state(state, type_names_));
  x_in.rightCols(cfg_.time_dim) =
      time_embedding(static_cast<double>(t), cfg_.time_dim).replicate(n, 1);

  Eigen::MatrixXd e_in = Eigen::MatrixXd::Zero(n * n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      e_in(i * n + j, i == j ? 0 : state.adj(i, j)) = 1.0;
    }
  }

  Eigen::MatrixXd x = in_x_.forward(x_in, false, nullptr);
  Eigen::MatrixXd e = in_e_.forward(e_in, false, nullptr);
  for (auto& layer : layers_) std::tie(x, e) = layer->forward(x, e);
  Eigen::MatrixXd node_logits = head_x_.forward(x, false, nullptr);
  const Eigen::MatrixXd raw = head_e_.forward(e, false, nullptr);

  Eigen::MatrixXd edge_logits(n * n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      edge_logits.row(i * n + j) =
          0.5 * (raw.row(i * n + j) + raw.row(j * n + i));
    }
  }
  return {std::move(node_logits), std::move(edge_logits)};
}

void GraphDenoiser::backward(const Eigen::MatrixXd& g_node,
                             const Eigen::MatrixXd& g_edge) {
  const int n = n_;
  Eigen::MatrixXd g_raw(n * n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      g_raw.row(i * n + j) =
          0.5 * (g_edge.row(i * n + j) + g_edge.row(j * n + i));
    }
  }
  Eigen::MatrixXd gx = head_x_.backward(g_node);
  Eigen::MatrixXd ge = head_e_.backward(g_raw);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    std::tie(gx, ge) = (*it)->backward(gx, ge);
  }
  in_x_.backward(gx);
  in_e_.backward(ge);
}

std::vector<ParamRef> GraphDenoiser::parameters() { return params_; }

std::vector<double> GraphDenoiser::flatten() const {
  std::vector<double> flat;
  for (const ParamRef& p : params_) {
    flat.insert(flat.end(), p.value->data(), p.value->data() + p.value->size());
  }
  return flat;
}

void GraphDenoiser::unflatten(const std::vector<double>& flat) {
  std::size_t at = 0;
  for (const ParamRef& p : params_) {
    const std::size_t count = static_cast<std::size_t>(p.value->size());
    if (at + count > flat.size()) {
      throw std::invalid_argument("GraphDenoiser: checkpoint too short");
    }
    std::copy(flat.begin() + static_cast<long>(at),
              flat.begin() + static_cast<long>(at + count), p.value->data());
    at += count;
  }
  if (at != flat.size()) {
    throw std::invalid_argument("GraphDenoiser: checkpoint size mismatch");
  }
}

GraphDenoiser train_graph_denoiser(const std::vector<HeteroGraph>& bucket,
                                   const std::vector<std::string>& type_names,
                                   const GraphDiffusionConfig& cfg,
                                   std::mt19937_64& rng,
                                   std::vector<double>* loss_history) {
  if (bucket.empty()) {
    throw std::invalid_argument("train_graph_denoiser: empty bucket");
  }
  const int n = static_cast<int>(bucket.front().node_count());
  for (const HeteroGraph& g : bucket) {
    if (static_cast<int>(g.node_count()) != n) {
      throw std::invalid_argument("train_graph_denoiser: mixed graph sizes");
    }
  }
  GraphDenoiser model(n, type_names, cfg, rng);
  model.transition = estimate_transition_model(bucket, type_names);

  std::vector<GraphState> states;
  states.reserve(bucket.size());
  for (const HeteroGraph& g : bucket) {
    states.push_back(encode_graph(g, type_names));
  }

  Adam opt(model.parameters(),
           {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  std::uniform_int_distribution<std::size_t> pick_graph(0, states.size() - 1);
  std::uniform_int_distribution<int> pick_t(1, cfg.T);
  const int k = static_cast<int>(type_names.size());

  for (int step = 0; step < cfg.steps; ++step) {
    // Cosine decay with a 1% floor; single-draw steps need a calm tail.
    const double frac = static_cast<double>(step) / cfg.steps;
    opt.set_lr(cfg.lr * (0.01 + 0.99 * 0.5 * (1.0 + std::cos(M_PI * frac))));

    const GraphState& clean = states[pick_graph(rng)];
    const int t = pick_t(rng);
    const GraphState noisy =
        forward_noise_graph(clean, t, model.schedule, model.transition, rng);

    auto [node_logits, edge_logits] = model.forward(noisy, t);

    Eigen::MatrixXd node_target = one_hot(clean.node_types, k);
    std::vector<int> edge_states(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        edge_states[static_cast<std::size_t>(i) * n + j] =
            i == j ? 0 : clean.adj(i, j);
      }
    }
    Eigen::MatrixXd edge_target = one_hot(edge_states, 2);

    const LossGrad ln = cross_entropy(node_logits, node_target);
    const LossGrad le = cross_entropy(edge_logits, edge_target);
    model.final_loss = ln.loss + cfg.lambda_edges * le.loss;
    if (loss_history) loss_history->push_back(model.final_loss);

    opt.zero_grad();
    model.backward(ln.grad, cfg.lambda_edges * le.grad);
    opt.step();
  }
  return model;
}

std::vector<HeteroGraph> sample_graphs(GraphDenoiser& model, int count,
                                       std::mt19937_64& rng) {
  std::vector<HeteroGraph> out;
  out.reserve(std::max(count, 0));
  const int n = model.n();
  const int T = model.schedule.T;
  for (int s = 0; s < count; ++s) {
    GraphState state;
    state.node_types.resize(n);
    state.adj = Eigen::MatrixXi::Zero(n, n);
    for (int v = 0; v < n; ++v) {
      state.node_types[v] = sample_categorical(model.transition.m_node, rng);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const int e = sample_categorical(model.transition.m_edge, rng);
        state.adj(i, j) = e;
        state.adj(j, i) = e;
      }
    }
    for (int t = T; t >= 1; --t) {
      auto [node_logits, edge_logits] = model.forward(state, t);
      const Eigen::MatrixXd p_node = softmax_rows(node_logits);
      const Eigen::MatrixXd p_edge = softmax_rows(edge_logits);
      const double a_t = model.schedule.alpha[t];
      const double abar_t = model.schedule.alpha_bar[t];
      const double abar_prev = model.schedule.alpha_bar[t - 1];
      const Eigen::MatrixXd qt_n = marginal_transition(a_t, model.transition.m_node);
      const Eigen::MatrixXd qbt_n =
          marginal_transition_bar(abar_t, model.transition.m_node);
      const Eigen::MatrixXd qbp_n =
          marginal_transition_bar(abar_prev, model.transition.m_node);
      const Eigen::MatrixXd qt_e = marginal_transition(a_t, model.transition.m_edge);
      const Eigen::MatrixXd qbt_e =
          marginal_transition_bar(abar_t, model.transition.m_edge);
      const Eigen::MatrixXd qbp_e =
          marginal_transition_bar(abar_prev, model.transition.m_edge);

      GraphState next = state;
      for (int v = 0; v < n; ++v) {
        const Eigen::VectorXd post = posterior_row(
            p_node.row(v).transpose(), state.node_types[v], qt_n, qbp_n, qbt_n);
        next.node_types[v] = sample_categorical(post, rng);
      }
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const Eigen::VectorXd post =
              posterior_row(p_edge.row(i * n + j).transpose(), state.adj(i, j),
                            qt_e, qbp_e, qbt_e);
          const int e = sample_categorical(post, rng);
          next.adj(i, j) = e;
          next.adj(j, i) = e;
        }
      }
      state = std::move(next);
    }
    out.push_back(decode_state(state, model.type_names()));
  }
  return out;
}

}  // namespace hegex
