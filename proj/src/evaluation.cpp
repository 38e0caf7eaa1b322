#include "hegex/evaluation.hpp"

#include "hegex/graph_stats.hpp"
#include "hegex/subgraph_iso.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace hegex {

MmdConfig MmdConfig::for_statistic(GraphStatistic s) {
  MmdConfig cfg;
  cfg.statistic = s;
  switch (s) {
    case GraphStatistic::Clustering:
      cfg.bins = 100;
      cfg.range_min = 0.0;
      cfg.range_max = 1.0;
      break;
    case GraphStatistic::Spectrum:
      cfg.bins = 200;
      cfg.range_min = 0.0;
      cfg.range_max = 2.0;
      break;
    case GraphStatistic::Degree:
    case GraphStatistic::NodeTypeDistribution:
      cfg.bins = 1;  // binning by exact value
      break;
  }
  return cfg;
}

void MmdConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("MmdConfig: sigma must be > 0");
  if (bins < 1) throw std::invalid_argument("MmdConfig: bins must be >= 1");
  if ((statistic == GraphStatistic::Clustering ||
       statistic == GraphStatistic::Spectrum) &&
      !(range_max > range_min)) {
    throw std::invalid_argument("MmdConfig: empty histogram range");
  }
}

namespace {

Eigen::VectorXd bin_values(const Eigen::VectorXd& vals, int bins, double lo,
                           double hi) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(bins);
  if (vals.size() == 0) return h;
  const double width = (hi - lo) / bins;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    int idx = static_cast<int>(std::floor((vals(i) - lo) / width));
    idx = std::clamp(idx, 0, bins - 1);
    h(idx) += 1.0;
  }
  h /= static_cast<double>(vals.size());
  return h;
}

// Per-graph normalized statistic histograms over a support shared by both
// corpora.
std::pair<std::vector<Eigen::VectorXd>, std::vector<Eigen::VectorXd>>
statistic_histograms(const std::vector<HeteroGraph>& set_a,
                     const std::vector<HeteroGraph>& set_b,
                     const MmdConfig& cfg) {
  for (const auto* set : {&set_a, &set_b}) {
    for (const HeteroGraph& g : *set) {
      if (g.node_count() == 0) throw std::invalid_argument("mmd: empty graph");
    }
  }
  std::vector<Eigen::VectorXd> ha, hb;
  auto emit = [&](const HeteroGraph& g, const Eigen::VectorXd& h, bool first) {
    (first ? ha : hb).push_back(h);
    (void)g;
  };

  switch (cfg.statistic) {
    case GraphStatistic::Degree: {
      int max_deg = 0;
      for (const auto* set : {&set_a, &set_b}) {
        for (const HeteroGraph& g : *set) {
          for (const auto& [d, frac] : degree_histogram(g)) {
            max_deg = std::max(max_deg, d);
          }
        }
      }
      for (bool first : {true, false}) {
        for (const HeteroGraph& g : first ? set_a : set_b) {
          Eigen::VectorXd h = Eigen::VectorXd::Zero(max_deg + 1);
          for (const auto& [d, frac] : degree_histogram(g)) h(d) = frac;
          emit(g, h, first);
        }
      }
      break;
    }
    case GraphStatistic::Clustering: {
      for (bool first : {true, false}) {
        for (const HeteroGraph& g : first ? set_a : set_b) {
          emit(g,
               bin_values(clustering_coefficients(g).per_node, cfg.bins,
                          cfg.range_min, cfg.range_max),
               first);
        }
      }
      break;
    }
    case GraphStatistic::Spectrum: {
      for (bool first : {true, false}) {
        for (const HeteroGraph& g : first ? set_a : set_b) {
          emit(g,
               bin_values(laplacian_spectrum(g), cfg.bins, cfg.range_min,
                          cfg.range_max),
               first);
        }
      }
      break;
    }
    case GraphStatistic::NodeTypeDistribution: {
      std::set<std::string> types;
      for (const auto* set : {&set_a, &set_b}) {
        for (const HeteroGraph& g : *set) {
          for (const auto& [id, type] : g.nodes()) types.insert(type);
        }
      }
      std::unordered_map<std::string, int> slot;
      for (const std::string& t : types) {
        slot.emplace(t, static_cast<int>(slot.size()));
      }
      for (bool first : {true, false}) {
        for (const HeteroGraph& g : first ? set_a : set_b) {
          Eigen::VectorXd h =
              Eigen::VectorXd::Zero(static_cast<Eigen::Index>(types.size()));
          for (const auto& [type, frac] : node_type_histogram(g)) {
            h(slot.at(type)) = frac;
          }
          emit(g, h, first);
        }
      }
      break;
    }
  }
  return {std::move(ha), std::move(hb)};
}

double kernel_mean(const std::vector<Eigen::VectorXd>& xs,
                   const std::vector<Eigen::VectorXd>& ys, double sigma) {
  double sum = 0.0;
  for (const Eigen::VectorXd& x : xs) {
    for (const Eigen::VectorXd& y : ys) {
      const double tv = 0.5 * (x - y).lpNorm<1>();
      sum += std::exp(-tv * tv / (2.0 * sigma * sigma));
    }
  }
  return sum / (static_cast<double>(xs.size()) * static_cast<double>(ys.size()));
}

}  // namespace

double mmd(const std::vector<HeteroGraph>& set_a,
           const std::vector<HeteroGraph>& set_b, const MmdConfig& cfg) {
  cfg.validate();
  if (set_a.empty() || set_b.empty()) {
    throw std::invalid_argument("mmd: empty graph set");
  }
  const auto [ha, hb] = statistic_histograms(set_a, set_b, cfg);
  const double value = kernel_mean(ha, ha, cfg.sigma) +
                       kernel_mean(hb, hb, cfg.sigma) -
                       2.0 * kernel_mean(ha, hb, cfg.sigma);
  return std::max(0.0, value);
}

double ntd_mmd(const std::vector<HeteroGraph>& generated,
               const std::vector<HeteroGraph>& real, double sigma) {
  MmdConfig cfg = MmdConfig::for_statistic(GraphStatistic::NodeTypeDistribution);
  cfg.sigma = sigma;
  return mmd(generated, real, cfg);
}

double feature_cosine(const FeatureMatrix& gen, const FeatureMatrix& train) {
  if (gen.width() != train.width()) {
    throw std::invalid_argument("feature_cosine: width mismatch");
  }
  if (gen.count() == 0 || train.count() == 0) {
    throw std::invalid_argument("feature_cosine: empty feature matrix");
  }
  double sum = 0.0;
  for (int i = 0; i < gen.count(); ++i) {
    const double ni = gen.rows.row(i).norm();
    if (ni == 0.0) continue;
    for (int j = 0; j < train.count(); ++j) {
      const double nj = train.rows.row(j).norm();
      if (nj == 0.0) continue;
      sum += gen.rows.row(i).dot(train.rows.row(j)) / (ni * nj);
    }
  }
  return sum / (static_cast<double>(gen.count()) *
                static_cast<double>(train.count()));
}

double predictive_faithfulness(const ExplanationReport& report) {
  if (report.classes.empty()) {
    throw std::invalid_argument("predictive_faithfulness: empty report");
  }
  double sum = 0.0;
  for (const ClassExplanation& e : report.classes) {
    if (e.class_index < 0 || e.class_index >= e.probs.size()) {
      throw std::invalid_argument("predictive_faithfulness: malformed report entry");
    }
    sum += e.probs(e.class_index);
  }
  return sum / static_cast<double>(report.classes.size());
}

const std::vector<HeteroGraph>& MotifSet::for_class(int c) const {
  const auto it = per_class.find(c);
  if (it != per_class.end() && !it->second.empty()) return it->second;
  if (!shared.empty()) return shared;
  throw std::invalid_argument("MotifSet: no motifs for class " +
                              std::to_string(c));
}

double ground_truth_faithfulness(const ExplanationReport& report,
                                 const MotifSet& motifs) {
  if (report.classes.empty()) {
    throw std::invalid_argument("ground_truth_faithfulness: empty report");
  }
  double sum = 0.0;
  for (const ClassExplanation& e : report.classes) {
    const std::vector<HeteroGraph>& list = motifs.for_class(e.class_index);
    int contained = 0;
    for (const HeteroGraph& m : list) {
      contained += contains_subgraph(e.graph, m);
    }
    sum += static_cast<double>(contained) / static_cast<double>(list.size());
  }
  return sum / static_cast<double>(report.classes.size());
}

namespace {

// Weighted multigraph state for one aggregation level. Neighbor weights
// are symmetric; self holds each node's loop weight counted once.
struct LevelGraph {
  std::vector<std::map<int, double>> w;
  std::vector<double> self;

  int n() const { return static_cast<int>(w.size()); }
};

double level_modularity(const LevelGraph& lg, const std::vector<int>& comm,
                        double m2) {
  std::map<int, double> in_c, tot_c;
  for (int i = 0; i < lg.n(); ++i) {
    double k = 2.0 * lg.self[i];
    for (const auto& [j, wij] : lg.w[i]) {
      k += wij;
      if (comm[j] == comm[i]) in_c[comm[i]] += wij;
    }
    in_c[comm[i]] += 2.0 * lg.self[i];
    tot_c[comm[i]] += k;
  }
  double q = 0.0;
  for (const auto& [c, in] : in_c) {
    const double tot = tot_c[c];
    q += in / m2 - (tot / m2) * (tot / m2);
  }
  return q;
}

}  // namespace

LouvainResult louvain_communities(const HeteroGraph& g) {
  if (g.node_count() == 0) {
    throw std::invalid_argument("louvain_communities: empty graph");
  }
  if (g.edge_count() == 0) {
    throw std::invalid_argument("louvain_communities: graph has no edges");
  }

  std::vector<NodeId> ids;
  ids.reserve(static_cast<std::size_t>(g.node_count()));
  for (const auto& [id, type] : g.nodes()) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  std::unordered_map<NodeId, int> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    pos[ids[i]] = static_cast<int>(i);
  }

  LevelGraph lg;
  lg.w.assign(ids.size(), {});
  lg.self.assign(ids.size(), 0.0);
  for (const auto& [u, v] : g.edges()) {
    lg.w[pos[u]][pos[v]] += 1.0;
    lg.w[pos[v]][pos[u]] += 1.0;
  }
  const double m2 = 2.0 * g.edge_count();

  // node_comm maps every original node to its community in the current
  // level's labeling; membership maps level nodes.
  std::vector<int> node_comm(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) node_comm[i] = static_cast<int>(i);

  LouvainResult result;
  double level_q = level_modularity(
      lg, [&] {
        std::vector<int> identity(static_cast<std::size_t>(lg.n()));
        for (int i = 0; i < lg.n(); ++i) identity[static_cast<std::size_t>(i)] = i;
        return identity;
      }(),
      m2);

  const double min_gain = 1e-7;
  while (true) {
    const int n = lg.n();
    std::vector<int> comm(static_cast<std::size_t>(n));
    std::vector<double> k(static_cast<std::size_t>(n), 0.0);
    std::vector<double> tot(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      comm[i] = i;
      k[i] = 2.0 * lg.self[i];
      for (const auto& [j, wij] : lg.w[i]) k[i] += wij;
      tot[i] = k[i];
    }

    const double before_level = level_q;
    bool moved_any = true;
    for (int pass = 0; pass < 1000 && moved_any; ++pass) {
      moved_any = false;
      for (int i = 0; i < n; ++i) {
        std::map<int, double> links;
        for (const auto& [j, wij] : lg.w[i]) links[comm[j]] += wij;
        const int old = comm[i];
        tot[old] -= k[i];
        double best_gain = (links.count(old) ? links[old] : 0.0) -
                           tot[old] * k[i] / m2;
        int best = old;
        for (const auto& [c, link] : links) {
          if (c == old) continue;
          const double gain = link - tot[c] * k[i] / m2;
          if (gain > best_gain + 1e-12) {
            best_gain = gain;
            best = c;
          }
        }
        tot[best] += k[i];
        comm[i] = best;
        if (best != old) moved_any = true;
      }
      const double q = level_modularity(lg, comm, m2);
      result.modularity_history.push_back(q);
      if (q - level_q <= min_gain) moved_any = false;
      level_q = std::max(level_q, q);
    }

    // Renumber communities and stop when nothing merged.
    std::map<int, int> renum;
    for (int i = 0; i < n; ++i) {
      renum.emplace(comm[i], static_cast<int>(renum.size()));
    }
    for (int& c : node_comm) c = renum.at(comm[c]);
    const int groups = static_cast<int>(renum.size());
    if (groups == n || level_q - before_level <= min_gain) break;

    LevelGraph next;
    next.w.assign(static_cast<std::size_t>(groups), {});
    next.self.assign(static_cast<std::size_t>(groups), 0.0);
    for (int i = 0; i < n; ++i) {
      const int ci = renum.at(comm[i]);
      next.self[ci] += lg.self[i];
      for (const auto& [j, wij] : lg.w[i]) {
        const int cj = renum.at(comm[j]);
        if (ci == cj) {
          if (i < j) next.self[ci] += wij;
        } else {
          next.w[ci][cj] += wij;
        }
      }
    }
    lg = std::move(next);
  }

  std::map<int, std::vector<NodeId>> groups;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    groups[node_comm[i]].push_back(ids[i]);
  }
  for (auto& [c, members] : groups) {
    std::sort(members.begin(), members.end());
    result.communities.push_back(std::move(members));
  }
  std::stable_sort(result.communities.begin(), result.communities.end(),
                   [](const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
                     if (a.size() != b.size()) return a.size() > b.size();
                     return a.front() < b.front();
                   });
  result.modularity = level_q;
  return result;
}

namespace {

std::optional<HeteroGraph> motif_from_sample(const HeteroGraph& sample) {
  if (sample.edge_count() == 0) return std::nullopt;
  const LouvainResult lr = louvain_communities(sample);
  const std::vector<NodeId>& largest = lr.communities.front();
  if (largest.size() < 3) return std::nullopt;
  HeteroGraph motif = induced_subgraph(sample, largest);
  if (!is_connected(motif)) return std::nullopt;
  return motif;
}

// One class shared by all classified-type nodes, when it exists.
std::optional<int> pure_class(const HeteroGraph& sample, const DatasetSpec& spec) {
  if (spec.task == Task::GraphClassification) return sample.graph_label;
  std::optional<int> found;
  const std::vector<NodeId> targets = sample.nodes_of_type(spec.classified_type);
  if (targets.empty()) return std::nullopt;
  for (NodeId id : targets) {
    const auto it = sample.class_labels.find(id);
    if (it == sample.class_labels.end()) return std::nullopt;
    if (found && *found != it->second) return std::nullopt;
    found = it->second;
  }
  return found;
}

void cap_largest_first(std::vector<HeteroGraph>& motifs, int max_motifs) {
  std::stable_sort(motifs.begin(), motifs.end(),
                   [](const HeteroGraph& a, const HeteroGraph& b) {
                     return a.node_count() > b.node_count();
                   });
  if (static_cast<int>(motifs.size()) > max_motifs) {
    motifs.resize(static_cast<std::size_t>(max_motifs));
  }
}

}  // namespace

MotifSet extract_motifs(const std::vector<HeteroGraph>& samples,
                        const DatasetSpec& spec, bool per_class,
                        int max_motifs) {
  if (samples.empty()) {
    throw std::invalid_argument("extract_motifs: no samples");
  }
  if (max_motifs < 1) {
    throw std::invalid_argument("extract_motifs: max_motifs must be >= 1");
  }
  spec.validate();

  MotifSet set;
  auto shared_pool = [&] {
    std::vector<HeteroGraph> pool;
    for (const HeteroGraph& s : samples) {
      if (auto m = motif_from_sample(s)) pool.push_back(std::move(*m));
    }
    cap_largest_first(pool, max_motifs);
    return pool;
  };

  if (!per_class) {
    set.shared = shared_pool();
    return set;
  }

  for (const HeteroGraph& s : samples) {
    const std::optional<int> cls = pure_class(s, spec);
    if (!cls || *cls < 0 || *cls >= spec.num_classes) continue;
    if (auto m = motif_from_sample(s)) {
      set.per_class[*cls].push_back(std::move(*m));
    }
  }
  for (int c = 0; c < spec.num_classes; ++c) {
    if (set.per_class[c].empty()) {
      set.per_class.erase(c);
      set.fallback_classes.push_back(c);
    }
  }
  for (auto& [c, motifs] : set.per_class) cap_largest_first(motifs, max_motifs);
  if (!set.fallback_classes.empty()) set.shared = shared_pool();
  return set;
}

}  // namespace hegex
