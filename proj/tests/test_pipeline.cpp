#include "hegex/pipeline.hpp"

#include "hegex/graph_json.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace hegex;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hegex_pipeline_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Small enough to train in seconds while keeping every stage meaningful.
PipelineConfig toy_config(const std::string& out_dir) {
  PipelineConfig cfg;
  cfg.dataset = "tree-cycle";
  cfg.tree_depth = 3;
  cfg.num_motifs = 2;
  cfg.motif_param = 6;
  cfg.size_min = 5;
  cfg.size_max = 6;
  cfg.per_size = 6;
  cfg.candidate_per_size = 8;
  cfg.max_motifs = 5;
  cfg.graph.T = 6;
  cfg.graph.hidden = 8;
  cfg.graph.pair_hidden = 4;
  cfg.graph.heads = 2;
  cfg.graph.layers = 1;
  cfg.graph.time_dim = 4;
  cfg.graph.steps = 12;
  cfg.feat_discrete.T = 6;
  cfg.feat_discrete.hidden = 8;
  cfg.feat_discrete.blocks = 1;
  cfg.feat_discrete.time_dim = 4;
  cfg.feat_discrete.steps = 5;
  cfg.feat_continuous.T = 6;
  cfg.feat_continuous.hidden = 8;
  cfg.feat_continuous.blocks = 1;
  cfg.feat_continuous.time_dim = 4;
  cfg.feat_continuous.steps = 5;
  cfg.gnn.hidden = 8;
  cfg.gnn.layers = 2;
  cfg.gnn.max_epochs = 40;
  cfg.gnn.patience = 10;
  cfg.seed = 11;
  cfg.out_dir = out_dir;
  return cfg;
}

void check_stage_error(const std::function<void()>& run,
                       const std::string& stage, const std::string& producer) {
  try {
    run();
    FAIL("expected a missing-artifact error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find(stage + ": missing artifact") != std::string::npos);
    CHECK(msg.find("run the " + producer + " stage first") != std::string::npos);
  }
}

}  // namespace

TEST_CASE("config json round trip preserves every field") {
  PipelineConfig c;
  c.dataset = "file";
  c.dataset_path = "data/toy.json";
  c.task = "graph";
  c.classified_type = "paper";
  c.num_classes = 3;
  c.tree_depth = 4;
  c.motif_param = 3;
  c.num_motifs = 7;
  c.base_nodes = 50;
  c.num_graphs = 24;
  c.size_min = 6;
  c.size_max = 9;
  c.per_size = 17;
  c.eval_per_size = 5;
  c.p_burn = 0.3;
  c.graph.T = 25;
  c.graph.hidden = 12;
  c.graph.lambda_edges = 2.5;
  c.graph.steps = 77;
  c.feat_discrete.T = 9;
  c.feat_discrete.dropout = 0.1;
  c.feat_continuous.beta_max = 0.4;
  c.feat_continuous.steps = 33;
  c.gnn.patience = 13;
  c.gnn.val_fraction = 0.25;
  c.candidate_per_size = 21;
  c.max_motifs = 4;
  c.motifs_per_class = false;
  c.seed = 4242;
  c.runs = 3;
  c.out_dir = "elsewhere";

  const PipelineConfig r = config_from_json(config_to_json(c));
  CHECK_EQ(r.dataset, c.dataset);
  CHECK_EQ(r.dataset_path, c.dataset_path);
  CHECK_EQ(r.task, c.task);
  CHECK_EQ(r.classified_type, c.classified_type);
  CHECK_EQ(r.num_classes, c.num_classes);
  CHECK_EQ(r.tree_depth, c.tree_depth);
  CHECK_EQ(r.motif_param, c.motif_param);
  CHECK_EQ(r.num_motifs, c.num_motifs);
  CHECK_EQ(r.base_nodes, c.base_nodes);
  CHECK_EQ(r.num_graphs, c.num_graphs);
  CHECK_EQ(r.size_min, c.size_min);
  CHECK_EQ(r.size_max, c.size_max);
  CHECK_EQ(r.per_size, c.per_size);
  CHECK_EQ(r.eval_per_size, c.eval_per_size);
  CHECK_EQ(r.p_burn, c.p_burn);
  CHECK_EQ(r.graph.T, c.graph.T);
  CHECK_EQ(r.graph.hidden, c.graph.hidden);
  CHECK_EQ(r.graph.lambda_edges, c.graph.lambda_edges);
  CHECK_EQ(r.graph.steps, c.graph.steps);
  CHECK_EQ(r.feat_discrete.T, c.feat_discrete.T);
  CHECK_EQ(r.feat_discrete.dropout, c.feat_discrete.dropout);
  CHECK_EQ(r.feat_continuous.beta_max, c.feat_continuous.beta_max);
  CHECK_EQ(r.feat_continuous.steps, c.feat_continuous.steps);
  CHECK_EQ(r.gnn.patience, c.gnn.patience);
  CHECK_EQ(r.gnn.val_fraction, c.gnn.val_fraction);
  CHECK_EQ(r.candidate_per_size, c.candidate_per_size);
  CHECK_EQ(r.max_motifs, c.max_motifs);
  CHECK_EQ(r.motifs_per_class, c.motifs_per_class);
  CHECK_EQ(r.seed, c.seed);
  CHECK_EQ(r.runs, c.runs);
  CHECK_EQ(r.out_dir, c.out_dir);
}

TEST_CASE("config files load with defaults and fail loudly") {
  const std::string dir = fresh_dir("config_files");
  const std::string path = dir + "/partial.json";
  {
    std::ofstream out(path);
    out << R"({"dataset": "ba-shapes", "seed": 7, "gnn": {"hidden": 5}})";
  }
  const PipelineConfig c = load_pipeline_config(path);
  CHECK_EQ(c.dataset, "ba-shapes");
  CHECK_EQ(c.seed, 7u);
  CHECK_EQ(c.gnn.hidden, 5);
  CHECK_EQ(c.gnn.layers, HeteroGnnConfig{}.layers);  // untouched default
  CHECK_EQ(c.per_size, PipelineConfig{}.per_size);

  CHECK_THROWS_AS(load_pipeline_config(dir + "/absent.json"), std::runtime_error);
  const std::string broken = dir + "/broken.json";
  {
    std::ofstream out(broken);
    out << "{not json";
  }
  CHECK_THROWS_AS(load_pipeline_config(broken), std::runtime_error);
}

TEST_CASE("config hash ignores run plumbing but tracks the recipe") {
  PipelineConfig base;
  const std::string h = config_hash(base);
  CHECK_EQ(h.size(), 16u);
  CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK_EQ(config_hash(base), h);

  PipelineConfig repeats = base;
  repeats.runs = 5;
  CHECK_EQ(config_hash(repeats), h);

  PipelineConfig forced = base;
  forced.force = true;
  CHECK_EQ(config_hash(forced), h);

  PipelineConfig reseeded = base;
  reseeded.seed = 99;
  CHECK_NE(config_hash(reseeded), h);

  PipelineConfig resized = base;
  resized.per_size += 1;
  CHECK_NE(config_hash(resized), h);

  PipelineConfig retrained = base;
  retrained.graph.steps += 1;
  CHECK_NE(config_hash(retrained), h);
}

TEST_CASE("config validation rejects bad values") {
  const PipelineConfig good;
  CHECK_NOTHROW(good.validate());

  auto reject = [](void (*mutate)(PipelineConfig&)) {
    PipelineConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  reject([](PipelineConfig& c) { c.dataset = "mystery"; });
  reject([](PipelineConfig& c) { c.dataset = "file"; });  // path missing
  reject([](PipelineConfig& c) { c.task = "edge"; });
  reject([](PipelineConfig& c) { c.size_min = 1; });
  reject([](PipelineConfig& c) { c.size_min = 9; c.size_max = 8; });
  reject([](PipelineConfig& c) { c.per_size = 0; });
  reject([](PipelineConfig& c) { c.eval_per_size = -1; });
  reject([](PipelineConfig& c) { c.candidate_per_size = -2; });
  reject([](PipelineConfig& c) { c.num_classes = 1; });
  reject([](PipelineConfig& c) { c.runs = 0; });
  reject([](PipelineConfig& c) { c.max_motifs = 0; });
  reject([](PipelineConfig& c) { c.p_burn = 0.0; });
  reject([](PipelineConfig& c) { c.p_burn = 1.0; });
  reject([](PipelineConfig& c) { c.out_dir.clear(); });
}

TEST_CASE("graph denoiser checkpoints round trip") {
  GraphDiffusionConfig cfg;
  cfg.T = 5;
  cfg.hidden = 8;
  cfg.pair_hidden = 4;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.time_dim = 4;
  std::mt19937_64 rng(33);
  GraphDenoiser model(3, {"a", "b"}, cfg, rng);
  model.transition.m_node = (Eigen::VectorXd(2) << 0.25, 0.75).finished();
  model.transition.m_edge = (Eigen::VectorXd(2) << 0.6, 0.4).finished();
  model.final_loss = 0.125;

  const auto loaded = load_graph_denoiser(save_graph_denoiser(model));
  CHECK_EQ(loaded->n(), 3);
  CHECK(loaded->type_names() == std::vector<std::string>{"a", "b"});
  CHECK_EQ(loaded->config().T, cfg.T);
  CHECK_EQ(loaded->config().hidden, cfg.hidden);
  CHECK_EQ(loaded->final_loss, 0.125);
  CHECK(loaded->transition.m_node == model.transition.m_node);
  CHECK(loaded->transition.m_edge == model.transition.m_edge);
  CHECK(loaded->flatten() == model.flatten());

  std::mt19937_64 ra(5), rb(5);
  const std::vector<HeteroGraph> sa = sample_graphs(model, 2, ra);
  const std::vector<HeteroGraph> sb = sample_graphs(*loaded, 2, rb);
  REQUIRE_EQ(sa.size(), sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK_EQ(write_hetero_graph(sa[i]), write_hetero_graph(sb[i]));
  }
}

TEST_CASE("feature model checkpoints round trip") {
  DiscreteFeatureConfig dcfg;
  dcfg.T = 6;
  dcfg.hidden = 8;
  dcfg.blocks = 1;
  dcfg.time_dim = 4;
  std::mt19937_64 rng(71);
  DiscreteFeatureModel disc(2, {0.0, 1.0}, dcfg, rng);
  disc.priors.resize(2, 2);
  disc.priors << 0.75, 0.25, 0.4, 0.6;
  disc.final_loss = -0.5;

  const auto dl = load_discrete_model(save_discrete_model(disc));
  CHECK_EQ(dl->width(), 2);
  CHECK(dl->alphabet() == std::vector<double>{0.0, 1.0});
  CHECK(dl->priors == disc.priors);
  CHECK_EQ(dl->final_loss, -0.5);
  CHECK(dl->net().flatten() == disc.net().flatten());
  std::mt19937_64 da(9), db(9);
  CHECK(sample_discrete(disc, 5, da) == sample_discrete(*dl, 5, db));

  ContinuousFeatureConfig ccfg;
  ccfg.T = 5;
  ccfg.hidden = 8;
  ccfg.blocks = 1;
  ccfg.time_dim = 4;
  ccfg.steps = 3;
  Eigen::MatrixXd rows(10, 2);
  for (int i = 0; i < 10; ++i) {
    rows(i, 0) = 0.1 * i;
    rows(i, 1) = 3.0 - 0.2 * i;
  }
  std::mt19937_64 crng(13);
  ContinuousFeatureModel cont = train_continuous(rows, ccfg, crng);
  const auto cl = load_continuous_model(save_continuous_model(cont));
  CHECK_EQ(cl->width(), 2);
  CHECK(cl->mean == cont.mean);
  CHECK(cl->std == cont.std);
  CHECK(cl->beta == cont.beta);
  CHECK(cl->alpha_bar == cont.alpha_bar);
  CHECK(cl->net().flatten() == cont.net().flatten());
  std::mt19937_64 ca(21), cb(21);
  CHECK(sample_continuous(cont, 4, ca) == sample_continuous(*cl, 4, cb));
}

TEST_CASE("gnn checkpoints round trip") {
  DatasetSpec spec;
  spec.name = "nodes";
  spec.task = Task::NodeClassification;
  spec.classified_type = "node";
  spec.num_classes = 2;
  spec.metagraph.types = {"node"};
  spec.metagraph.add_type_edge("node", "node");

  std::mt19937_64 rng(3);
  HeteroGnn model(spec, {{"node", 0}}, HeteroGnnConfig{}, rng);
  const auto loaded = load_gnn(save_gnn(model));
  CHECK(loaded->flatten() == model.flatten());
  CHECK_EQ(loaded->spec().name, "nodes");
  CHECK_EQ(loaded->spec().num_classes, 2);
  CHECK(loaded->feature_widths() == std::map<std::string, int>{{"node", 0}});

  HeteroGraph tri;
  for (int v = 0; v < 3; ++v) tri.add_node(v, "node");
  tri.add_edge(0, 1);
  tri.add_edge(1, 2);
  tri.add_edge(0, 2);
  CHECK(model.predict_node(tri, 1) == loaded->predict_node(tri, 1));
}

TEST_CASE("explanation reports round trip through json") {
  HeteroGraph g;
  g.add_node(0, "node");
  g.add_node(3, "node");
  g.add_edge(0, 3);
  FeatureMatrix fm;
  fm.kind = FeatureMatrix::Kind::Discrete;
  fm.alphabet = {0.0, 1.0};
  fm.rows.resize(2, 2);
  fm.rows << 1.0, 0.0, 0.0, 1.0;
  g.features["node"] = fm;

  ExplanationReport report;
  ClassExplanation node_level;
  node_level.class_index = 0;
  node_level.graph = g;
  node_level.candidate_index = 4;
  node_level.node = 3;
  node_level.probs = (Eigen::VectorXd(2) << 0.8, 0.2).finished();
  ClassExplanation graph_level;
  graph_level.class_index = 1;
  graph_level.graph = g;
  graph_level.candidate_index = 2;
  graph_level.node = -1;
  graph_level.probs = (Eigen::VectorXd(2) << 0.3, 0.7).finished();
  report.classes = {node_level, graph_level};
  report.generated = 16;
  report.connected = 12;
  report.valid = 10;
  report.metrics = {{"pf", 0.75}, {"gf", 0.5}};

  const nlohmann::ordered_json j = report_to_json(report);
  CHECK(j["classes"][0]["node"].get<int>() == 3);
  CHECK(j["classes"][1]["node"].is_null());
  CHECK_EQ(j["classes"][0]["prob"].get<double>(), 0.8);
  CHECK_EQ(j["classes"][1]["prob"].get<double>(), 0.7);

  const ExplanationReport r = report_from_json(j);
  REQUIRE_EQ(r.classes.size(), 2u);
  CHECK_EQ(r.classes[0].class_index, 0);
  CHECK_EQ(r.classes[0].candidate_index, 4);
  CHECK_EQ(r.classes[0].node, 3);
  CHECK(r.classes[0].probs == node_level.probs);
  CHECK_EQ(r.classes[1].node, -1);
  CHECK(r.classes[1].probs == graph_level.probs);
  CHECK_EQ(write_hetero_graph(r.classes[0].graph), write_hetero_graph(g));
  CHECK_EQ(r.generated, 16);
  CHECK_EQ(r.connected, 12);
  CHECK_EQ(r.valid, 10);
  CHECK_EQ(r.metrics.at("pf"), 0.75);
  CHECK_EQ(r.metrics.at("gf"), 0.5);
}

TEST_CASE("sample stage skips reruns until the recipe changes") {
  const std::string dir = fresh_dir("sample_stage");
  PipelineConfig cfg = toy_config(dir);

  const StageResult first = cmd_sample(cfg);
  CHECK(first.ran);
  CHECK(first.outputs == std::vector<std::string>{"corpus.json", "eval_corpus.json"});
  REQUIRE(fs::exists(dir + "/corpus.json"));
  REQUIRE(fs::exists(dir + "/eval_corpus.json"));
  const std::string corpus_bytes = slurp(dir + "/corpus.json");

  const json manifest = json::parse(slurp(dir + "/manifest_sample.json"));
  CHECK_EQ(manifest.at("stage").get<std::string>(), "sample");
  CHECK_EQ(manifest.at("seed").get<std::uint64_t>(), cfg.seed);
  CHECK_EQ(manifest.at("config_hash").get<std::string>(), config_hash(cfg));
  CHECK_EQ(manifest.at("outputs").size(), 2u);

  CHECK_FALSE(cmd_sample(cfg).ran);

  // Forcing reruns the stage but reproduces the same bytes for the same seed.
  cfg.force = true;
  CHECK(cmd_sample(cfg).ran);
  CHECK_EQ(slurp(dir + "/corpus.json"), corpus_bytes);
  cfg.force = false;

  // A missing output invalidates the manifest.
  fs::remove(dir + "/eval_corpus.json");
  CHECK(cmd_sample(cfg).ran);
  CHECK(fs::exists(dir + "/eval_corpus.json"));

  // So does a different seed.
  cfg.seed = 12;
  CHECK(cmd_sample(cfg).ran);
  CHECK_FALSE(cmd_sample(cfg).ran);
}

TEST_CASE("stages demand their upstream artifacts") {
  const std::string dir = fresh_dir("missing_artifacts");
  const PipelineConfig cfg = toy_config(dir);
  check_stage_error([&] { cmd_train_graph(cfg); }, "train-graph", "sample");
  check_stage_error([&] { cmd_train_feat(cfg); }, "train-feat", "sample");
  check_stage_error([&] { cmd_train_gnn(cfg); }, "train-gnn", "sample");
  check_stage_error([&] { cmd_explain(cfg); }, "explain", "sample");
  check_stage_error([&] { cmd_evaluate(cfg); }, "evaluate", "sample");
}

TEST_CASE("the full pipeline runs end to end on a toy dataset") {
  const std::string dir = fresh_dir("end_to_end");
  PipelineConfig cfg = toy_config(dir);

  REQUIRE(cmd_sample(cfg).ran);
  // With the corpus in place the next gap is the denoiser bank.
  check_stage_error([&] { cmd_explain(cfg); }, "explain", "train-graph");

  const StageResult tg = cmd_train_graph(cfg);
  REQUIRE(tg.ran);
  CHECK_EQ(tg.outputs.size(), 2u);  // one denoiser per corpus size
  for (const std::string& name : tg.outputs) {
    CHECK(fs::exists(dir + "/" + name));
  }
  CHECK_FALSE(cmd_train_graph(cfg).ran);

  const StageResult tf = cmd_train_feat(cfg);
  REQUIRE(tf.ran);
  // The toy dataset carries no features, so only the plan itself appears.
  CHECK(tf.outputs == std::vector<std::string>{"feature_plan.json"});
  const json plan = json::parse(slurp(dir + "/feature_plan.json"));
  CHECK(plan.at("entries").empty());

  REQUIRE(cmd_train_gnn(cfg).ran);
  const json gnn = json::parse(slurp(dir + "/gnn_tree-cycle.json"));
  CHECK(gnn.at("val_history").size() >= 1u);
  CHECK(gnn.at("best_score").get<double>() >= 0.0);

  REQUIRE(cmd_explain(cfg).ran);
  const ExplanationReport report =
      report_from_json(json::parse(slurp(dir + "/explanation_report.json")));
  REQUIRE_EQ(report.classes.size(), 2u);
  CHECK(report.generated >= report.connected);
  CHECK(report.connected >= report.valid);
  CHECK(report.valid > 0);
  for (const ClassExplanation& e : report.classes) {
    CHECK(e.node >= 0);
    CHECK(e.probs.size() == 2);
    CHECK(e.graph.node_count() >= cfg.size_min);
  }

  REQUIRE(cmd_evaluate(cfg).ran);
  const json eval = json::parse(slurp(dir + "/evaluation_report.json"));
  CHECK_EQ(eval.at("dataset").get<std::string>(), "tree-cycle");
  REQUIRE_EQ(eval.at("runs").size(), 1u);
  const json& mean = eval.at("mean");
  for (const char* key :
       {"pf", "gf", "mmd_degree", "mmd_clustering", "mmd_spectrum", "mmd_ntd"}) {
    REQUIRE(mean.contains(key));
    CHECK(mean.at(key).get<double>() >= 0.0);
  }
  CHECK(mean.at("pf").get<double>() <= 1.0);
  CHECK(mean.at("gf").get<double>() <= 1.0);
  CHECK_FALSE(cmd_evaluate(cfg).ran);

  // Raising the run count regenerates explanations (without retraining)
  // and re-aggregates the evaluation over both reports.
  cfg.runs = 2;
  const StageResult re = cmd_explain(cfg);
  REQUIRE(re.ran);
  CHECK(re.outputs == std::vector<std::string>{"explanation_report.json",
                                               "explanation_report_run1.json"});
  CHECK(fs::exists(dir + "/explanation_report_run1.json"));
  REQUIRE(cmd_evaluate(cfg).ran);
  const json eval2 = json::parse(slurp(dir + "/evaluation_report.json"));
  CHECK_EQ(eval2.at("runs").size(), 2u);
}
