#include "hegex/explainer.hpp"

#include <algorithm>
#include <stdexcept>

namespace hegex {

namespace {

Eigen::MatrixXd sample_rows(TrainedGenerator& gen, int count,
                            std::mt19937_64& rng) {
  if (gen.entry.kind == GeneratorKind::Discrete) {
    if (!gen.discrete) {
      throw std::runtime_error("candidate generation: missing feature model for type " +
                               gen.entry.type);
    }
    return sample_discrete(*gen.discrete, count, rng);
  }
  if (gen.entry.kind == GeneratorKind::Continuous) {
    if (!gen.continuous) {
      throw std::runtime_error("candidate generation: missing feature model for type " +
                               gen.entry.type);
    }
    return sample_continuous(*gen.continuous, count, rng);
  }
  throw std::runtime_error("candidate generation: plan entry for type " +
                           gen.entry.type + " carries no generator");
}

void attach_features(HeteroGraph& g, FeatureModelSet& features,
                     std::mt19937_64& rng) {
  // Group plan entries by type; multi-entry types are per-class stacks
  // from which one generator is drawn per graph.
  std::map<std::string, std::vector<int>> by_type;
  for (std::size_t i = 0; i < features.generators.size(); ++i) {
    by_type[features.generators[i].entry.type].push_back(static_cast<int>(i));
  }
  for (const auto& [type, entries] : by_type) {
    const int count = static_cast<int>(g.nodes_of_type(type).size());
    if (count == 0) continue;
    int pick = entries.front();
    if (entries.size() > 1) {
      std::uniform_int_distribution<std::size_t> dist(0, entries.size() - 1);
      pick = entries[dist(rng)];
    }
    TrainedGenerator& gen = features.generators[static_cast<std::size_t>(pick)];
    FeatureMatrix fm;
    fm.kind = gen.entry.kind == GeneratorKind::Discrete
                  ? FeatureMatrix::Kind::Discrete
                  : FeatureMatrix::Kind::Continuous;
    fm.alphabet = gen.entry.alphabet;
    fm.rows = sample_rows(gen, count, rng);
    g.features[type] = std::move(fm);
  }
}

// Softmax scores for every node of the classified type, paired with the
// node ids in ascending order.
std::vector<std::pair<NodeId, Eigen::VectorXd>> node_scores(
    const HeteroGraph& g, HeteroGnn& model) {
  std::vector<NodeId> targets = g.nodes_of_type(model.spec().classified_type);
  std::sort(targets.begin(), targets.end());
  std::vector<std::pair<NodeId, Eigen::VectorXd>> out;
  out.reserve(targets.size());
  if (targets.empty()) return out;
  const Eigen::MatrixXd states = model.forward_states(g);
  const CompactGraph c = compact(g);
  for (NodeId id : targets) {
    const Eigen::MatrixXd logits =
        model.head().forward(states.row(c.index.at(id)), false, nullptr);
    out.emplace_back(id, softmax_rows(logits).row(0).transpose());
  }
  return out;
}

}  // namespace

CandidateSet generate_candidates(ModelBank& bank, FeatureModelSet& features,
                                 int per_size, const Metagraph& metagraph,
                                 std::mt19937_64& rng) {
  if (per_size < 1) {
    throw std::invalid_argument("generate_candidates: per_size must be >= 1");
  }
  if (bank.models.empty()) {
    throw std::invalid_argument("generate_candidates: empty model bank");
  }
  CandidateSet set;
  for (auto& [n, model] : bank.models) {
    for (int i = 0; i < per_size; ++i) {
      const std::uint64_t seed = rng();
      std::mt19937_64 sub(seed);
      HeteroGraph g = sample_graphs(*model, 1, sub).front();
      attach_features(g, features, sub);
      ++set.generated;
      if (!is_connected(g)) continue;
      ++set.connected;
      if (!is_valid_wrt_metagraph(g, metagraph)) continue;
      ++set.valid;
      ++set.per_size[n];
      set.items.push_back({std::move(g), n, seed});
    }
  }
  if (set.items.empty()) {
    throw std::runtime_error(
        "candidate generation: no sampled graph survived the connectivity "
        "and metagraph filters");
  }
  return set;
}

ExplanationReport select_node_explanations(const CandidateSet& candidates,
                                           HeteroGnn& model) {
  const int num_classes = model.spec().num_classes;
  ExplanationReport report;
  report.generated = candidates.generated;
  report.connected = candidates.connected;
  report.valid = candidates.valid;

  std::vector<ClassExplanation> best(static_cast<std::size_t>(num_classes));
  std::vector<double> best_prob(static_cast<std::size_t>(num_classes), -1.0);
  for (std::size_t ci = 0; ci < candidates.items.size(); ++ci) {
    const auto scores = node_scores(candidates.items[ci].graph, model);
    for (const auto& [id, probs] : scores) {
      for (int c = 0; c < num_classes; ++c) {
        if (probs(c) > best_prob[static_cast<std::size_t>(c)]) {
          best_prob[static_cast<std::size_t>(c)] = probs(c);
          ClassExplanation& e = best[static_cast<std::size_t>(c)];
          e.class_index = c;
          e.graph = candidates.items[ci].graph;
          e.candidate_index = static_cast<int>(ci);
          e.node = id;
          e.probs = probs;
        }
      }
    }
  }
  if (best_prob.empty() || best_prob.front() < 0.0) {
    throw std::runtime_error(
        "explanation selection: no candidate contains a node of the "
        "classified type");
  }
  report.classes = std::move(best);
  return report;
}

ExplanationReport select_graph_explanations(const CandidateSet& candidates,
                                            HeteroGnn& model) {
  if (candidates.items.empty()) {
    throw std::invalid_argument("explanation selection: empty candidate set");
  }
  const int num_classes = model.spec().num_classes;
  ExplanationReport report;
  report.generated = candidates.generated;
  report.connected = candidates.connected;
  report.valid = candidates.valid;

  std::vector<ClassExplanation> best(static_cast<std::size_t>(num_classes));
  std::vector<double> best_prob(static_cast<std::size_t>(num_classes), -1.0);
  for (std::size_t ci = 0; ci < candidates.items.size(); ++ci) {
    const Eigen::VectorXd probs = model.predict_graph(candidates.items[ci].graph);
    for (int c = 0; c < num_classes; ++c) {
      if (probs(c) > best_prob[static_cast<std::size_t>(c)]) {
        best_prob[static_cast<std::size_t>(c)] = probs(c);
        ClassExplanation& e = best[static_cast<std::size_t>(c)];
        e.class_index = c;
        e.graph = candidates.items[ci].graph;
        e.candidate_index = static_cast<int>(ci);
        e.probs = probs;
      }
    }
  }
  report.classes = std::move(best);
  return report;
}

std::vector<std::vector<ScoredCandidate>> top_k_explanations(
    const CandidateSet& candidates, HeteroGnn& model, int k) {
  if (k < 1) throw std::invalid_argument("top_k_explanations: k must be >= 1");
  if (candidates.items.empty()) {
    throw std::invalid_argument("top_k_explanations: empty candidate set");
  }
  const DatasetSpec& spec = model.spec();
  const int num_classes = spec.num_classes;

  // Best score (and node) per candidate per class.
  std::vector<std::vector<ScoredCandidate>> scored(
      static_cast<std::size_t>(num_classes));
  for (std::size_t ci = 0; ci < candidates.items.size(); ++ci) {
    const HeteroGraph& g = candidates.items[ci].graph;
    if (spec.task == Task::GraphClassification) {
      const Eigen::VectorXd probs = model.predict_graph(g);
      for (int c = 0; c < num_classes; ++c) {
        scored[static_cast<std::size_t>(c)].push_back(
            {static_cast<int>(ci), -1, probs(c)});
      }
    } else {
      const auto scores = node_scores(g, model);
      if (scores.empty()) continue;
      for (int c = 0; c < num_classes; ++c) {
        ScoredCandidate best{static_cast<int>(ci), -1, -1.0};
        for (const auto& [id, probs] : scores) {
          if (probs(c) > best.prob) {
            best.prob = probs(c);
            best.node = id;
          }
        }
        scored[static_cast<std::size_t>(c)].push_back(best);
      }
    }
  }

  for (auto& list : scored) {
    std::stable_sort(list.begin(), list.end(),
                     [](const ScoredCandidate& a, const ScoredCandidate& b) {
                       return a.prob > b.prob;
                     });
    if (static_cast<int>(list.size()) > k) list.resize(static_cast<std::size_t>(k));
  }
  return scored;
}

}  // namespace hegex
