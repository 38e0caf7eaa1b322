#include "hegex/pipeline.hpp"

#include "hegex/graph_json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace hegex {

namespace {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t stage_seed(std::uint64_t base, const std::string& tag) {
  std::uint64_t h = fnv1a64(tag);
  h ^= base + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::string dataset_name(const PipelineConfig& cfg) {
  if (cfg.dataset == "file") {
    const std::string stem = fs::path(cfg.dataset_path).stem().string();
    return stem.empty() ? std::string("file") : stem;
  }
  return cfg.dataset;
}

void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << bytes;
    if (!out.good()) {
      throw std::runtime_error("cannot write file '" + tmp + "'");
    }
  }
  fs::rename(tmp, path);
}

void write_json_file(const std::string& path, const ordered_json& j) {
  atomic_write(path, j.dump(2) + "\n");
}

json read_json_artifact(const std::string& stage, const std::string& path,
                        const std::string& producer) {
  if (!fs::exists(path)) {
    throw std::runtime_error(stage + ": missing artifact '" + path +
                             "'; run the " + producer + " stage first");
  }
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(stage + ": cannot parse '" + path + "': " + e.what());
  }
}

// ---- Eigen <-> json ----

ordered_json vec_to_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ordered_json rowvec_to_json(const Eigen::RowVectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

Eigen::RowVectorXd rowvec_from_json(const json& a) {
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

ordered_json mat_to_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(rowvec_to_json(m.row(r)));
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& a) {
  const Eigen::Index rows = static_cast<Eigen::Index>(a.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::Index cols = static_cast<Eigen::Index>(a[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    m.row(r) = rowvec_from_json(a[static_cast<std::size_t>(r)]);
  }
  return m;
}

ordered_json params_to_json(const std::vector<double>& flat) {
  ordered_json a = ordered_json::array();
  for (double v : flat) a.push_back(v);
  return a;
}

std::vector<double> params_from_json(const json& a) {
  std::vector<double> flat;
  flat.reserve(a.size());
  for (const auto& v : a) flat.push_back(v.get<double>());
  return flat;
}

// ---- sub-config <-> json ----

ordered_json graph_cfg_to_json(const GraphDiffusionConfig& c) {
  return ordered_json{{"T", c.T},
                      {"hidden", c.hidden},
                      {"pair_hidden", c.pair_hidden},
                      {"heads", c.heads},
                      {"layers", c.layers},
                      {"time_dim", c.time_dim},
                      {"lambda_edges", c.lambda_edges},
                      {"lr", c.lr},
                      {"weight_decay", c.weight_decay},
                      {"steps", c.steps}};
}

GraphDiffusionConfig graph_cfg_from_json(const json& j) {
  GraphDiffusionConfig c;
  c.T = j.value("T", c.T);
  c.hidden = j.value("hidden", c.hidden);
  c.pair_hidden = j.value("pair_hidden", c.pair_hidden);
  c.heads = j.value("heads", c.heads);
  c.layers = j.value("layers", c.layers);
  c.time_dim = j.value("time_dim", c.time_dim);
  c.lambda_edges = j.value("lambda_edges", c.lambda_edges);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.steps = j.value("steps", c.steps);
  return c;
}

ordered_json discrete_cfg_to_json(const DiscreteFeatureConfig& c) {
  return ordered_json{{"T", c.T},          {"hidden", c.hidden},
                      {"blocks", c.blocks}, {"dropout", c.dropout},
                      {"time_dim", c.time_dim}, {"lr", c.lr},
                      {"weight_decay", c.weight_decay}, {"steps", c.steps}};
}

DiscreteFeatureConfig discrete_cfg_from_json(const json& j) {
  DiscreteFeatureConfig c;
  c.T = j.value("T", c.T);
  c.hidden = j.value("hidden", c.hidden);
  c.blocks = j.value("blocks", c.blocks);
  c.dropout = j.value("dropout", c.dropout);
  c.time_dim = j.value("time_dim", c.time_dim);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.steps = j.value("steps", c.steps);
  return c;
}

ordered_json continuous_cfg_to_json(const ContinuousFeatureConfig& c) {
  return ordered_json{{"T", c.T},          {"hidden", c.hidden},
                      {"blocks", c.blocks}, {"dropout", c.dropout},
                      {"time_dim", c.time_dim}, {"lr", c.lr},
                      {"weight_decay", c.weight_decay}, {"steps", c.steps},
                      {"beta_min", c.beta_min}, {"beta_max", c.beta_max}};
}

ContinuousFeatureConfig continuous_cfg_from_json(const json& j) {
  ContinuousFeatureConfig c;
  c.T = j.value("T", c.T);
  c.hidden = j.value("hidden", c.hidden);
  c.blocks = j.value("blocks", c.blocks);
  c.dropout = j.value("dropout", c.dropout);
  c.time_dim = j.value("time_dim", c.time_dim);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.steps = j.value("steps", c.steps);
  c.beta_min = j.value("beta_min", c.beta_min);
  c.beta_max = j.value("beta_max", c.beta_max);
  return c;
}

ordered_json gnn_cfg_to_json(const HeteroGnnConfig& c) {
  return ordered_json{{"hidden", c.hidden},
                      {"layers", c.layers},
                      {"lr", c.lr},
                      {"weight_decay", c.weight_decay},
                      {"max_epochs", c.max_epochs},
                      {"patience", c.patience},
                      {"val_fraction", c.val_fraction}};
}

HeteroGnnConfig gnn_cfg_from_json(const json& j) {
  HeteroGnnConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  return c;
}

ordered_json spec_to_json(const DatasetSpec& spec) {
  ordered_json types = ordered_json::array();
  for (const std::string& t : spec.metagraph.types) types.push_back(t);
  ordered_json edges = ordered_json::array();
  for (const auto& [a, b] : spec.metagraph.type_edges) {
    edges.push_back(ordered_json::array({a, b}));
  }
  return ordered_json{
      {"name", spec.name},
      {"task", spec.task == Task::GraphClassification ? "graph" : "node"},
      {"classified_type", spec.classified_type},
      {"num_classes", spec.num_classes},
      {"metagraph", ordered_json{{"types", types}, {"type_edges", edges}}}};
}

DatasetSpec spec_from_json(const json& j) {
  DatasetSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.task = j.at("task").get<std::string>() == "graph"
                  ? Task::GraphClassification
                  : Task::NodeClassification;
  spec.classified_type = j.at("classified_type").get<std::string>();
  spec.num_classes = j.at("num_classes").get<int>();
  for (const auto& t : j.at("metagraph").at("types")) {
    spec.metagraph.types.insert(t.get<std::string>());
  }
  for (const auto& e : j.at("metagraph").at("type_edges")) {
    spec.metagraph.add_type_edge(e[0].get<std::string>(), e[1].get<std::string>());
  }
  return spec;
}

ordered_json graph_to_json(const HeteroGraph& g) {
  return ordered_json::parse(write_hetero_graph(g));
}

HeteroGraph graph_from_json(const json& j) { return load_hetero_graph(j.dump()); }

// ---- corpus persistence ----

ordered_json corpus_to_json(const DatasetSpec& spec, const SampledCorpus& corpus) {
  ordered_json buckets = ordered_json::object();
  for (const auto& [n, graphs] : corpus.buckets) {
    ordered_json list = ordered_json::array();
    for (const HeteroGraph& g : graphs) list.push_back(graph_to_json(g));
    buckets[std::to_string(n)] = std::move(list);
  }
  return ordered_json{
      {"spec", spec_to_json(spec)},
      {"sizes", ordered_json::array({corpus.sizes.first, corpus.sizes.second})},
      {"per_size", corpus.per_size},
      {"buckets", std::move(buckets)}};
}

std::pair<DatasetSpec, SampledCorpus> corpus_from_json(const json& j) {
  DatasetSpec spec = spec_from_json(j.at("spec"));
  SampledCorpus corpus;
  corpus.sizes = {j.at("sizes")[0].get<int>(), j.at("sizes")[1].get<int>()};
  corpus.per_size = j.at("per_size").get<int>();
  for (const auto& [key, list] : j.at("buckets").items()) {
    std::vector<HeteroGraph>& bucket = corpus.buckets[std::stoi(key)];
    for (const auto& gj : list) bucket.push_back(graph_from_json(gj));
  }
  return {std::move(spec), std::move(corpus)};
}

std::vector<HeteroGraph> flatten_buckets(const SampledCorpus& corpus) {
  std::vector<HeteroGraph> all;
  for (const auto& [n, graphs] : corpus.buckets) {
    all.insert(all.end(), graphs.begin(), graphs.end());
  }
  return all;
}

// ---- manifests ----

std::string manifest_path(const PipelineConfig& cfg, const std::string& stage) {
  return (fs::path(cfg.out_dir) / ("manifest_" + stage + ".json")).string();
}

std::string out_path(const PipelineConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out_dir) / name).string();
}

// A stage is fresh when its manifest matches the config hash, seed (and
// run count where generation repeats), and every recorded output exists.
bool stage_fresh(const PipelineConfig& cfg, const std::string& stage,
                 const std::vector<std::string>& outputs, bool runs_sensitive) {
  if (cfg.force) return false;
  const std::string path = manifest_path(cfg, stage);
  if (!fs::exists(path)) return false;
  json m;
  try {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    m = json::parse(buf.str());
  } catch (...) {
    return false;
  }
  if (m.value("config_hash", std::string()) != config_hash(cfg)) return false;
  if (m.value("seed", std::uint64_t{0}) != cfg.seed) return false;
  if (runs_sensitive && m.value("runs", 1) != cfg.runs) return false;
  std::vector<std::string> recorded;
  for (const auto& o : m.value("outputs", json::array())) {
    recorded.push_back(o.get<std::string>());
  }
  if (recorded != outputs) return false;
  for (const std::string& name : outputs) {
    if (!fs::exists(out_path(cfg, name))) return false;
  }
  return true;
}

void write_manifest(const PipelineConfig& cfg, const std::string& stage,
                    const std::vector<std::string>& outputs) {
  ordered_json list = ordered_json::array();
  for (const std::string& o : outputs) list.push_back(o);
  write_json_file(manifest_path(cfg, stage),
                  ordered_json{{"stage", stage},
                               {"config_hash", config_hash(cfg)},
                               {"seed", cfg.seed},
                               {"runs", cfg.runs},
                               {"outputs", std::move(list)}});
}

StageResult skipped(std::vector<std::string> outputs) {
  StageResult r;
  r.ran = false;
  r.outputs = std::move(outputs);
  return r;
}

StageResult completed(const PipelineConfig& cfg, const std::string& stage,
                      std::vector<std::string> outputs) {
  write_manifest(cfg, stage, outputs);
  StageResult r;
  r.ran = true;
  r.outputs = std::move(outputs);
  return r;
}

// ---- dataset assembly ----

struct BuiltDataset {
  DatasetSpec spec;
  std::vector<HeteroGraph> graphs;  // graph task: one entry per graph
  HeteroGraph whole;                // node task: the full source graph
};

BuiltDataset build_dataset(const PipelineConfig& cfg, std::mt19937_64& rng) {
  BuiltDataset d;
  d.spec.name = dataset_name(cfg);
  d.spec.classified_type = cfg.classified_type;

  if (cfg.dataset == "tree-cycle" || cfg.dataset == "tree-grid") {
    TreeMotif motif;
    motif.kind = cfg.dataset == "tree-cycle" ? TreeMotif::Kind::Cycle
                                             : TreeMotif::Kind::Grid;
    motif.param = cfg.motif_param;
    d.whole = gen_tree_motif(cfg.tree_depth, motif, cfg.num_motifs, rng);
    d.spec.task = Task::NodeClassification;
    d.spec.num_classes = 2;
  } else if (cfg.dataset == "ba-shapes") {
    d.whole = gen_ba_shapes(cfg.base_nodes, cfg.num_motifs, rng);
    d.spec.task = Task::NodeClassification;
    d.spec.num_classes = 4;
  } else if (cfg.dataset == "ba-3motif") {
    for (auto& [g, label] : gen_ba3motif(cfg.num_graphs, rng)) {
      g.graph_label = label;
      d.graphs.push_back(std::move(g));
    }
    d.spec.task = Task::GraphClassification;
    d.spec.num_classes = 3;
  } else if (cfg.dataset == "file") {
    if (cfg.task == "graph") {
      throw std::runtime_error(
          "sample: file datasets support the node task only");
    }
    d.whole = load_graph_file(cfg.dataset_path);
    d.spec.task = Task::NodeClassification;
    d.spec.num_classes = cfg.num_classes;
  } else {
    throw std::runtime_error("sample: unknown dataset '" + cfg.dataset + "'");
  }

  if (d.spec.task == Task::GraphClassification) {
    Metagraph m;
    for (const HeteroGraph& g : d.graphs) {
      const Metagraph gm = extract_metagraph(g);
      m.types.insert(gm.types.begin(), gm.types.end());
      m.type_edges.insert(gm.type_edges.begin(), gm.type_edges.end());
    }
    d.spec.metagraph = m;
  } else {
    d.spec.metagraph = extract_metagraph(d.whole);
  }
  d.spec.validate();
  return d;
}

std::vector<std::string> spec_type_names(const DatasetSpec& spec) {
  return {spec.metagraph.types.begin(), spec.metagraph.types.end()};
}

std::string feat_file_name(const std::string& dataset, const GeneratorEntry& e) {
  std::string name = "feat_" + dataset + "_" + e.type;
  if (e.class_index) name += "_class" + std::to_string(*e.class_index);
  return name + ".json";
}

std::string report_file_name(int run) {
  return run == 0 ? std::string("explanation_report.json")
                  : "explanation_report_run" + std::to_string(run) + ".json";
}

}  // namespace

// ---- config ----

void PipelineConfig::validate() const {
  if (dataset != "tree-cycle" && dataset != "tree-grid" &&
      dataset != "ba-shapes" && dataset != "ba-3motif" && dataset != "file") {
    throw std::invalid_argument("config: unknown dataset '" + dataset + "'");
  }
  if (dataset == "file" && dataset_path.empty()) {
    throw std::invalid_argument("config: dataset 'file' needs dataset_path");
  }
  if (task != "node" && task != "graph") {
    throw std::invalid_argument("config: task must be 'node' or 'graph'");
  }
  if (size_min > size_max || size_min < 2) {
    throw std::invalid_argument("config: bad size range");
  }
  if (per_size < 1) throw std::invalid_argument("config: per_size must be >= 1");
  if (eval_per_size < 0 || candidate_per_size < 0) {
    throw std::invalid_argument("config: negative sample count");
  }
  if (num_classes < 2) {
    throw std::invalid_argument("config: num_classes must be >= 2");
  }
  if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
  if (max_motifs < 1) {
    throw std::invalid_argument("config: max_motifs must be >= 1");
  }
  if (!(p_burn > 0.0 && p_burn < 1.0)) {
    throw std::invalid_argument("config: p_burn must lie in (0, 1)");
  }
  if (out_dir.empty()) throw std::invalid_argument("config: empty out dir");
}

ordered_json config_to_json(const PipelineConfig& c) {
  return ordered_json{{"dataset", c.dataset},
                      {"dataset_path", c.dataset_path},
                      {"task", c.task},
                      {"classified_type", c.classified_type},
                      {"num_classes", c.num_classes},
                      {"tree_depth", c.tree_depth},
                      {"motif_param", c.motif_param},
                      {"num_motifs", c.num_motifs},
                      {"base_nodes", c.base_nodes},
                      {"num_graphs", c.num_graphs},
                      {"size_min", c.size_min},
                      {"size_max", c.size_max},
                      {"per_size", c.per_size},
                      {"eval_per_size", c.eval_per_size},
                      {"p_burn", c.p_burn},
                      {"graph", graph_cfg_to_json(c.graph)},
                      {"feat_discrete", discrete_cfg_to_json(c.feat_discrete)},
                      {"feat_continuous", continuous_cfg_to_json(c.feat_continuous)},
                      {"gnn", gnn_cfg_to_json(c.gnn)},
                      {"candidate_per_size", c.candidate_per_size},
                      {"max_motifs", c.max_motifs},
                      {"motifs_per_class", c.motifs_per_class},
                      {"seed", c.seed},
                      {"runs", c.runs},
                      {"out", c.out_dir}};
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  c.dataset = j.value("dataset", c.dataset);
  c.dataset_path = j.value("dataset_path", c.dataset_path);
  c.task = j.value("task", c.task);
  c.classified_type = j.value("classified_type", c.classified_type);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.tree_depth = j.value("tree_depth", c.tree_depth);
  c.motif_param = j.value("motif_param", c.motif_param);
  c.num_motifs = j.value("num_motifs", c.num_motifs);
  c.base_nodes = j.value("base_nodes", c.base_nodes);
  c.num_graphs = j.value("num_graphs", c.num_graphs);
  c.size_min = j.value("size_min", c.size_min);
  c.size_max = j.value("size_max", c.size_max);
  c.per_size = j.value("per_size", c.per_size);
  c.eval_per_size = j.value("eval_per_size", c.eval_per_size);
  c.p_burn = j.value("p_burn", c.p_burn);
  if (j.contains("graph")) c.graph = graph_cfg_from_json(j.at("graph"));
  if (j.contains("feat_discrete")) {
    c.feat_discrete = discrete_cfg_from_json(j.at("feat_discrete"));
  }
  if (j.contains("feat_continuous")) {
    c.feat_continuous = continuous_cfg_from_json(j.at("feat_continuous"));
  }
  if (j.contains("gnn")) c.gnn = gnn_cfg_from_json(j.at("gnn"));
  c.candidate_per_size = j.value("candidate_per_size", c.candidate_per_size);
  c.max_motifs = j.value("max_motifs", c.max_motifs);
  c.motifs_per_class = j.value("motifs_per_class", c.motifs_per_class);
  c.seed = j.value("seed", c.seed);
  c.runs = j.value("runs", c.runs);
  c.out_dir = j.value("out", c.out_dir);
  return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  if (!fs::exists(path)) {
    throw std::runtime_error("cannot read config file '" + path + "'");
  }
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return config_from_json(json::parse(buf.str()));
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot parse config file '" + path + "': " + e.what());
  }
}

std::string config_hash(const PipelineConfig& c) {
  ordered_json j = config_to_json(c);
  j.erase("runs");  // runs repeat generation; they do not change a stage's recipe
  return hex64(fnv1a64(j.dump()));
}

// ---- checkpoints ----

ordered_json save_graph_denoiser(const GraphDenoiser& model) {
  ordered_json types = ordered_json::array();
  for (const std::string& t : model.type_names()) types.push_back(t);
  return ordered_json{{"kind", "graph_denoiser"},
                      {"n", model.n()},
                      {"type_names", std::move(types)},
                      {"config", graph_cfg_to_json(model.config())},
                      {"m_node", vec_to_json(model.transition.m_node)},
                      {"m_edge", vec_to_json(model.transition.m_edge)},
                      {"final_loss", model.final_loss},
                      {"params", params_to_json(model.flatten())}};
}

std::shared_ptr<GraphDenoiser> load_graph_denoiser(const json& j) {
  std::vector<std::string> types;
  for (const auto& t : j.at("type_names")) types.push_back(t.get<std::string>());
  std::mt19937_64 rng(0);
  auto model = std::make_shared<GraphDenoiser>(
      j.at("n").get<int>(), types, graph_cfg_from_json(j.at("config")), rng);
  model->transition.m_node = vec_from_json(j.at("m_node"));
  model->transition.m_edge = vec_from_json(j.at("m_edge"));
  model->final_loss = j.value("final_loss", 0.0);
  model->unflatten(params_from_json(j.at("params")));
  return model;
}

ordered_json save_discrete_model(const DiscreteFeatureModel& model) {
  ordered_json alphabet = ordered_json::array();
  for (double v : model.alphabet()) alphabet.push_back(v);
  return ordered_json{{"kind", "feat_discrete"},
                      {"width", model.width()},
                      {"alphabet", std::move(alphabet)},
                      {"config", discrete_cfg_to_json(model.config())},
                      {"priors", mat_to_json(model.priors)},
                      {"final_loss", model.final_loss},
                      {"params", params_to_json(model.net().flatten())}};
}

std::shared_ptr<DiscreteFeatureModel> load_discrete_model(const json& j) {
  std::vector<double> alphabet;
  for (const auto& v : j.at("alphabet")) alphabet.push_back(v.get<double>());
  std::mt19937_64 rng(0);
  auto model = std::make_shared<DiscreteFeatureModel>(
      j.at("width").get<int>(), alphabet,
      discrete_cfg_from_json(j.at("config")), rng);
  model->priors = mat_from_json(j.at("priors"));
  model->final_loss = j.value("final_loss", 0.0);
  model->net().unflatten(params_from_json(j.at("params")));
  return model;
}

ordered_json save_continuous_model(const ContinuousFeatureModel& model) {
  return ordered_json{{"kind", "feat_continuous"},
                      {"width", model.width()},
                      {"config", continuous_cfg_to_json(model.config())},
                      {"mean", rowvec_to_json(model.mean)},
                      {"std", rowvec_to_json(model.std)},
                      {"beta", vec_to_json(model.beta)},
                      {"alpha_bar", vec_to_json(model.alpha_bar)},
                      {"final_loss", model.final_loss},
                      {"params", params_to_json(model.net().flatten())}};
}

std::shared_ptr<ContinuousFeatureModel> load_continuous_model(const json& j) {
  std::mt19937_64 rng(0);
  auto model = std::make_shared<ContinuousFeatureModel>(
      j.at("width").get<int>(), continuous_cfg_from_json(j.at("config")), rng);
  model->mean = rowvec_from_json(j.at("mean"));
  model->std = rowvec_from_json(j.at("std"));
  model->beta = vec_from_json(j.at("beta"));
  model->alpha_bar = vec_from_json(j.at("alpha_bar"));
  model->final_loss = j.value("final_loss", 0.0);
  model->net().unflatten(params_from_json(j.at("params")));
  return model;
}

ordered_json save_gnn(const HeteroGnn& model) {
  ordered_json widths = ordered_json::object();
  for (const auto& [type, w] : model.feature_widths()) widths[type] = w;
  return ordered_json{{"kind", "gnn"},
                      {"spec", spec_to_json(model.spec())},
                      {"widths", std::move(widths)},
                      {"config", gnn_cfg_to_json(model.config())},
                      {"params", params_to_json(model.flatten())}};
}

std::shared_ptr<HeteroGnn> load_gnn(const json& j) {
  std::map<std::string, int> widths;
  for (const auto& [type, w] : j.at("widths").items()) {
    widths[type] = w.get<int>();
  }
  std::mt19937_64 rng(0);
  auto model = std::make_shared<HeteroGnn>(spec_from_json(j.at("spec")), widths,
                                           gnn_cfg_from_json(j.at("config")), rng);
  model->unflatten(params_from_json(j.at("params")));
  return model;
}

// ---- reports ----

ordered_json report_to_json(const ExplanationReport& report) {
  ordered_json classes = ordered_json::array();
  for (const ClassExplanation& e : report.classes) {
    ordered_json probs = ordered_json::array();
    for (Eigen::Index i = 0; i < e.probs.size(); ++i) probs.push_back(e.probs(i));
    ordered_json entry{{"class", e.class_index},
                       {"candidate_index", e.candidate_index},
                       {"prob", e.probs.size() ? e.probs(e.class_index) : 0.0},
                       {"probs", std::move(probs)},
                       {"graph", graph_to_json(e.graph)}};
    if (e.node >= 0) {
      entry["node"] = e.node;
    } else {
      entry["node"] = nullptr;
    }
    classes.push_back(std::move(entry));
  }
  ordered_json metrics = ordered_json::object();
  for (const auto& [key, value] : report.metrics) metrics[key] = value;
  return ordered_json{{"classes", std::move(classes)},
                      {"counts", ordered_json{{"generated", report.generated},
                                              {"connected", report.connected},
                                              {"valid", report.valid}}},
                      {"metrics", std::move(metrics)}};
}

ExplanationReport report_from_json(const json& j) {
  ExplanationReport report;
  for (const auto& entry : j.at("classes")) {
    ClassExplanation e;
    e.class_index = entry.at("class").get<int>();
    e.candidate_index = entry.at("candidate_index").get<int>();
    e.node = entry.at("node").is_null() ? -1 : entry.at("node").get<int>();
    e.probs = vec_from_json(entry.at("probs"));
    e.graph = graph_from_json(entry.at("graph"));
    report.classes.push_back(std::move(e));
  }
  const auto& counts = j.at("counts");
  report.generated = counts.at("generated").get<int>();
  report.connected = counts.at("connected").get<int>();
  report.valid = counts.at("valid").get<int>();
  const json metrics = j.value("metrics", json::object());
  for (const auto& [key, value] : metrics.items()) {
    report.metrics[key] = value.get<double>();
  }
  return report;
}

// ---- stages ----

StageResult cmd_sample(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const std::vector<std::string> outputs{"corpus.json", "eval_corpus.json"};
  if (stage_fresh(cfg, "sample", outputs, false)) return skipped(outputs);

  std::mt19937_64 rng(stage_seed(cfg.seed, "sample"));
  BuiltDataset d = build_dataset(cfg, rng);
  const std::pair<int, int> sizes{cfg.size_min, cfg.size_max};
  const int eval_count = cfg.eval_per_size > 0 ? cfg.eval_per_size : cfg.per_size;

  SampledCorpus train, eval;
  if (d.spec.task == Task::GraphClassification) {
    train = build_corpus(d.graphs, sizes);
    std::vector<HeteroGraph> extra;
    if (cfg.dataset == "ba-3motif") {
      for (auto& [g, label] : gen_ba3motif(cfg.num_graphs, rng)) {
        g.graph_label = label;
        extra.push_back(std::move(g));
      }
    } else {
      extra = d.graphs;  // no generator to draw held-out graphs from
    }
    eval = build_corpus(extra, sizes);
  } else {
    train = build_corpus(d.whole, sizes, cfg.per_size, d.spec.classified_type,
                         rng, cfg.p_burn);
    eval = build_corpus(d.whole, sizes, eval_count, d.spec.classified_type, rng,
                        cfg.p_burn);
  }
  if (train.total() == 0) {
    throw std::runtime_error("sample: the corpus is empty for sizes " +
                             std::to_string(cfg.size_min) + ".." +
                             std::to_string(cfg.size_max));
  }

  write_json_file(out_path(cfg, "corpus.json"), corpus_to_json(d.spec, train));
  write_json_file(out_path(cfg, "eval_corpus.json"), corpus_to_json(d.spec, eval));
  return completed(cfg, "sample", outputs);
}

StageResult cmd_train_graph(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const auto [spec, corpus] = corpus_from_json(
      read_json_artifact("train-graph", out_path(cfg, "corpus.json"), "sample"));

  std::vector<std::string> outputs;
  for (const auto& [n, bucket] : corpus.buckets) {
    outputs.push_back("graph_denoiser_" + spec.name + "_" + std::to_string(n) +
                      ".json");
  }
  if (stage_fresh(cfg, "train-graph", outputs, false)) return skipped(outputs);

  const std::vector<std::string> type_names = spec_type_names(spec);
  std::size_t at = 0;
  for (const auto& [n, bucket] : corpus.buckets) {
    std::mt19937_64 rng(
        stage_seed(cfg.seed, "train-graph:" + std::to_string(n)));
    GraphDenoiser model =
        train_graph_denoiser(bucket, type_names, cfg.graph, rng);
    write_json_file(out_path(cfg, outputs[at++]), save_graph_denoiser(model));
  }
  return completed(cfg, "train-graph", outputs);
}

StageResult cmd_train_feat(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const auto [spec, corpus] = corpus_from_json(
      read_json_artifact("train-feat", out_path(cfg, "corpus.json"), "sample"));
  const std::vector<HeteroGraph> all = flatten_buckets(corpus);
  const FeatureGeneratorPlan plan = plan_generators(spec, all);

  std::vector<std::string> outputs{"feature_plan.json"};
  for (const GeneratorEntry& e : plan.entries) {
    outputs.push_back(feat_file_name(spec.name, e));
  }
  if (stage_fresh(cfg, "train-feat", outputs, false)) return skipped(outputs);

  ordered_json plan_entries = ordered_json::array();
  std::size_t at = 1;
  for (const GeneratorEntry& e : plan.entries) {
    const std::string file = outputs[at++];
    ordered_json pe{{"type", e.type},
                    {"kind", e.kind == GeneratorKind::Discrete ? "discrete"
                                                               : "continuous"},
                    {"width", e.width},
                    {"file", file}};
    if (e.class_index) {
      pe["class"] = *e.class_index;
    } else {
      pe["class"] = nullptr;
    }
    plan_entries.push_back(std::move(pe));

    const Eigen::MatrixXd rows = collect_rows(all, e.type, e.class_index, spec.task);
    std::string tag = "train-feat:" + e.type;
    if (e.class_index) tag += ":" + std::to_string(*e.class_index);
    std::mt19937_64 rng(stage_seed(cfg.seed, tag));
    if (e.kind == GeneratorKind::Discrete) {
      DiscreteFeatureModel model =
          train_discrete(rows, e.alphabet, cfg.feat_discrete, rng);
      write_json_file(out_path(cfg, file), save_discrete_model(model));
    } else {
      ContinuousFeatureModel model =
          train_continuous(rows, cfg.feat_continuous, rng);
      write_json_file(out_path(cfg, file), save_continuous_model(model));
    }
  }
  write_json_file(out_path(cfg, "feature_plan.json"),
                  ordered_json{{"dataset", spec.name},
                               {"entries", std::move(plan_entries)}});
  return completed(cfg, "train-feat", outputs);
}

StageResult cmd_train_gnn(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const auto [spec, corpus] = corpus_from_json(
      read_json_artifact("train-gnn", out_path(cfg, "corpus.json"), "sample"));

  const std::vector<std::string> outputs{"gnn_" + spec.name + ".json"};
  if (stage_fresh(cfg, "train-gnn", outputs, false)) return skipped(outputs);

  std::mt19937_64 rng(stage_seed(cfg.seed, "train-gnn"));
  GnnTrainResult result;
  HeteroGnn model = train_gnn(flatten_buckets(corpus), spec, cfg.gnn, rng, &result);

  ordered_json j = save_gnn(model);
  ordered_json history = ordered_json::array();
  for (double v : result.val_history) history.push_back(v);
  j["val_history"] = std::move(history);
  j["best_score"] = result.best_score;
  j["best_epoch"] = result.best_epoch;
  write_json_file(out_path(cfg, outputs.front()), j);
  return completed(cfg, "train-gnn", outputs);
}

namespace {

struct LoadedStack {
  DatasetSpec spec;
  SampledCorpus corpus;
  ModelBank bank;
  FeatureModelSet features;
  std::shared_ptr<HeteroGnn> gnn;
};

LoadedStack load_stack(const PipelineConfig& cfg, const std::string& stage) {
  LoadedStack s;
  auto [spec, corpus] = corpus_from_json(
      read_json_artifact(stage, out_path(cfg, "corpus.json"), "sample"));
  s.spec = std::move(spec);
  s.corpus = std::move(corpus);

  for (const auto& [n, bucket] : s.corpus.buckets) {
    const std::string file = out_path(
        cfg, "graph_denoiser_" + s.spec.name + "_" + std::to_string(n) + ".json");
    s.bank.models[n] =
        load_graph_denoiser(read_json_artifact(stage, file, "train-graph"));
  }

  const json plan = read_json_artifact(
      stage, out_path(cfg, "feature_plan.json"), "train-feat");
  for (const auto& pe : plan.at("entries")) {
    TrainedGenerator gen;
    gen.entry.type = pe.at("type").get<std::string>();
    if (!pe.at("class").is_null()) gen.entry.class_index = pe.at("class").get<int>();
    gen.entry.width = pe.at("width").get<int>();
    const std::string file = out_path(cfg, pe.at("file").get<std::string>());
    if (pe.at("kind").get<std::string>() == "discrete") {
      gen.entry.kind = GeneratorKind::Discrete;
      gen.discrete =
          load_discrete_model(read_json_artifact(stage, file, "train-feat"));
      gen.entry.alphabet = gen.discrete->alphabet();
    } else {
      gen.entry.kind = GeneratorKind::Continuous;
      gen.continuous =
          load_continuous_model(read_json_artifact(stage, file, "train-feat"));
    }
    s.features.generators.push_back(std::move(gen));
  }

  s.gnn = load_gnn(read_json_artifact(
      stage, out_path(cfg, "gnn_" + s.spec.name + ".json"), "train-gnn"));
  return s;
}

}  // namespace

StageResult cmd_explain(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  std::vector<std::string> outputs;
  for (int r = 0; r < cfg.runs; ++r) outputs.push_back(report_file_name(r));
  if (stage_fresh(cfg, "explain", outputs, true)) return skipped(outputs);

  LoadedStack s = load_stack(cfg, "explain");
  const int per_size =
      cfg.candidate_per_size > 0 ? cfg.candidate_per_size : cfg.per_size;

  for (int r = 0; r < cfg.runs; ++r) {
    std::mt19937_64 rng(stage_seed(cfg.seed, "explain:" + std::to_string(r)));
    CandidateSet candidates = generate_candidates(
        s.bank, s.features, per_size, s.spec.metagraph, rng);
    ExplanationReport report = s.spec.task == Task::GraphClassification
                                   ? select_graph_explanations(candidates, *s.gnn)
                                   : select_node_explanations(candidates, *s.gnn);
    write_json_file(out_path(cfg, report_file_name(r)), report_to_json(report));
  }
  return completed(cfg, "explain", outputs);
}

StageResult cmd_evaluate(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const std::vector<std::string> outputs{"evaluation_report.json"};
  if (stage_fresh(cfg, "evaluate", outputs, true)) return skipped(outputs);

  const auto [spec, eval_corpus] = corpus_from_json(read_json_artifact(
      "evaluate", out_path(cfg, "eval_corpus.json"), "sample"));
  const std::vector<HeteroGraph> real = flatten_buckets(eval_corpus);
  if (real.empty()) {
    throw std::runtime_error("evaluate: the held-out corpus is empty");
  }
  const MotifSet motifs =
      extract_motifs(real, spec, cfg.motifs_per_class, cfg.max_motifs);

  ordered_json run_reports = ordered_json::array();
  std::map<std::string, double> sums;
  for (int r = 0; r < cfg.runs; ++r) {
    ExplanationReport report = report_from_json(read_json_artifact(
        "evaluate", out_path(cfg, report_file_name(r)), "explain"));

    std::map<std::string, double> metrics;
    metrics["pf"] = predictive_faithfulness(report);
    metrics["gf"] = ground_truth_faithfulness(report, motifs);

    std::vector<HeteroGraph> gen;
    for (const ClassExplanation& e : report.classes) gen.push_back(e.graph);
    metrics["mmd_degree"] =
        mmd(gen, real, MmdConfig::for_statistic(GraphStatistic::Degree));
    metrics["mmd_clustering"] =
        mmd(gen, real, MmdConfig::for_statistic(GraphStatistic::Clustering));
    metrics["mmd_spectrum"] =
        mmd(gen, real, MmdConfig::for_statistic(GraphStatistic::Spectrum));
    metrics["mmd_ntd"] = ntd_mmd(gen, real);

    // realism of attached features, pooled per type over both corpora
    std::map<std::string, std::vector<Eigen::RowVectorXd>> gen_rows, real_rows;
    auto pool = [](const std::vector<HeteroGraph>& graphs, auto& into) {
      for (const HeteroGraph& g : graphs) {
        for (const auto& [type, fm] : g.features) {
          for (int i = 0; i < fm.count(); ++i) {
            into[type].push_back(fm.rows.row(i));
          }
        }
      }
    };
    pool(gen, gen_rows);
    pool(real, real_rows);
    for (const auto& [type, rows] : gen_rows) {
      const auto it = real_rows.find(type);
      if (it == real_rows.end() || rows.empty() || it->second.empty()) continue;
      if (rows.front().size() != it->second.front().size()) continue;
      FeatureMatrix a, b;
      a.rows.resize(static_cast<Eigen::Index>(rows.size()), rows.front().size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        a.rows.row(static_cast<Eigen::Index>(i)) = rows[i];
      }
      b.rows.resize(static_cast<Eigen::Index>(it->second.size()),
                    it->second.front().size());
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        b.rows.row(static_cast<Eigen::Index>(i)) = it->second[i];
      }
      metrics["cosine_" + type] = feature_cosine(a, b);
    }

    ordered_json mj = ordered_json::object();
    for (const auto& [key, value] : metrics) {
      mj[key] = value;
      sums[key] += value;
    }
    run_reports.push_back(ordered_json{{"run", r},
                                       {"report", report_file_name(r)},
                                       {"metrics", std::move(mj)}});
  }

  ordered_json mean = ordered_json::object();
  for (const auto& [key, total] : sums) {
    mean[key] = total / static_cast<double>(cfg.runs);
  }
  ordered_json fallback = ordered_json::array();
  for (int c : motifs.fallback_classes) fallback.push_back(c);
  write_json_file(out_path(cfg, outputs.front()),
                  ordered_json{{"dataset", spec.name},
                               {"runs", std::move(run_reports)},
                               {"mean", std::move(mean)},
                               {"motif_fallback_classes", std::move(fallback)}});
  return completed(cfg, "evaluate", outputs);
}

}  // namespace hegex
