#include "bsgat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "bsgat/engine.hpp"
#include "bsgat/errors.hpp"
#include "bsgat/metrics.hpp"
#include "bsgat/trainer.hpp"

namespace bsgat {

namespace {

using nlohmann::json;

[[noreturn]] void key_error(const std::string& path, const std::string& what) {
  throw user_error("config key '" + path + "': " + what);
}

template <typename T>
void read_key(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    key_error(path.empty() ? key : path + "." + key, e.what());
  }
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> known) {
  for (const auto& item : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) {
          return item.key() == k;
        }) == known.end())
      key_error(path.empty() ? item.key() : path + "." + item.key(), "unknown key");
  }
}

}  // namespace

LabelSpace::Mode RunConfig::mode() const {
  if (label_mode == "binary") return LabelSpace::Mode::binary;
  if (label_mode == "multiclass") return LabelSpace::Mode::multiclass;
  throw user_error("label_mode must be 'binary' or 'multiclass', got '" + label_mode + "'");
}

void RunConfig::validate() const {
  (void)mode();
  if (threads < 1) throw user_error("threads must be at least 1");
  if (sampling.fraction <= 0.0 || sampling.fraction > 1.0)
    throw user_error("sampling fraction must be in (0, 1]");
  split.validate();
  graph.validate();
  train.validate();
}

std::uint64_t stage_seed(const RunConfig& cfg, const char* stage) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the stage name
  for (const char* p = stage; *p; ++p) h = (h ^ static_cast<unsigned char>(*p)) * 1099511628211ull;
  return mix_seed(cfg.seed, h);
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw user_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw user_error("config root must be a JSON object");
  check_keys(j, "", {"input", "graph", "checkpoint", "report_dir", "label_mode", "seed",
                     "threads", "column_roles", "sampling", "split", "graph_config",
                     "train_config", "features", "synth"});

  RunConfig cfg;
  read_key(j, "", "input", cfg.input);
  read_key(j, "", "graph", cfg.graph_path);
  read_key(j, "", "checkpoint", cfg.checkpoint);
  read_key(j, "", "report_dir", cfg.report_dir);
  read_key(j, "", "label_mode", cfg.label_mode);
  read_key(j, "", "seed", cfg.seed);
  read_key(j, "", "threads", cfg.threads);

  if (j.contains("column_roles")) {
    const json& roles = j.at("column_roles");
    if (!roles.is_object()) key_error("column_roles", "must map column names to roles");
    for (const auto& item : roles.items()) {
      try {
        cfg.schema.column_roles[item.key()] =
            column_role_from_string(item.value().get<std::string>());
      } catch (const json::exception& e) {
        key_error("column_roles." + item.key(), e.what());
      }
    }
  }
  if (j.contains("sampling")) {
    const json& s = j.at("sampling");
    check_keys(s, "sampling", {"fraction", "full_retention"});
    read_key(s, "sampling", "fraction", cfg.sampling.fraction);
    read_key(s, "sampling", "full_retention", cfg.sampling.full_retention);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    check_keys(s, "split", {"train", "val", "test"});
    read_key(s, "split", "train", cfg.split.train);
    read_key(s, "split", "val", cfg.split.val);
    read_key(s, "split", "test", cfg.split.test);
  }
  if (j.contains("graph_config")) {
    const json& g = j.at("graph_config");
    check_keys(g, "graph_config", {"lambda", "mu", "prefix_len"});
    read_key(g, "graph_config", "lambda", cfg.graph.lambda);
    read_key(g, "graph_config", "mu", cfg.graph.mu);
    read_key(g, "graph_config", "prefix_len", cfg.graph.prefix_len);
  }
  if (j.contains("train_config")) {
    const json& t = j.at("train_config");
    check_keys(t, "train_config",
               {"learning_rate", "dropout", "hidden", "layers", "minibatch", "epochs",
                "heads", "leaky_slope", "attention"});
    read_key(t, "train_config", "learning_rate", cfg.train.learning_rate);
    read_key(t, "train_config", "dropout", cfg.train.dropout);
    read_key(t, "train_config", "hidden", cfg.train.hidden);
    read_key(t, "train_config", "layers", cfg.train.layers);
    read_key(t, "train_config", "minibatch", cfg.train.minibatch);
    read_key(t, "train_config", "epochs", cfg.train.epochs);
    read_key(t, "train_config", "heads", cfg.train.heads);
    read_key(t, "train_config", "leaky_slope", cfg.train.leaky_slope);
    if (t.contains("attention")) {
      std::string mode;
      read_key(t, "train_config", "attention", mode);
      cfg.train.attention = attention_mode_from_string(mode);
    }
  }
  if (j.contains("features")) {
    const json& f = j.at("features");
    check_keys(f, "features", {"include_port_protocol"});
    read_key(f, "features", "include_port_protocol", cfg.features.include_port_protocol);
  }
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    check_keys(s, "synth",
               {"hosts", "subnets", "prefix_len", "feature_dim", "class_separation",
                "classes"});
    read_key(s, "synth", "hosts", cfg.synth.hosts);
    read_key(s, "synth", "subnets", cfg.synth.subnets);
    read_key(s, "synth", "prefix_len", cfg.synth.prefix_len);
    read_key(s, "synth", "feature_dim", cfg.synth.feature_dim);
    read_key(s, "synth", "class_separation", cfg.synth.class_separation);
    if (s.contains("classes")) {
      const json& classes = s.at("classes");
      if (!classes.is_array()) key_error("synth.classes", "must be an array");
      cfg.synth.classes.clear();
      for (std::size_t i = 0; i < classes.size(); ++i) {
        const json& c = classes[i];
        const std::string path = "synth.classes[" + std::to_string(i) + "]";
        check_keys(c, path, {"name", "attack", "flows", "src_hosts", "dst_count",
                             "src_ports", "feature_scale"});
        SynthClassSpec spec;
        read_key(c, path, "name", spec.name);
        read_key(c, path, "attack", spec.attack);
        read_key(c, path, "flows", spec.flows);
        read_key(c, path, "src_hosts", spec.src_hosts);
        read_key(c, path, "dst_count", spec.dst_count);
        read_key(c, path, "src_ports", spec.src_ports);
        read_key(c, path, "feature_scale", spec.feature_scale);
        cfg.synth.classes.push_back(std::move(spec));
      }
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw user_error("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_run_config(text);
  } catch (const user_error& e) {
    throw user_error(path + ": " + e.what());
  }
}

namespace {

struct Prepared {
  Dataset dataset;  // after class-stratified sampling
  SplitIndices splits;
};

Prepared prepare(const RunConfig& cfg) {
  Dataset dataset = load_flow_csv(cfg.input, cfg.schema);
  SamplingPolicy sampling = cfg.sampling;
  sampling.seed = stage_seed(cfg, "sample");
  std::vector<std::string> warnings;
  dataset.flows = sample_by_class(dataset.flows, sampling, &warnings);
  if (dataset.flows.empty()) throw user_error("sampling removed every flow");
  SplitSpec split = cfg.split;
  split.seed = stage_seed(cfg, "split");
  SplitIndices splits = split_indices(dataset.flows, split, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
  return Prepared{std::move(dataset), std::move(splits)};
}

std::vector<int> node_labels(const Dataset& dataset, const LabelSpace& space) {
  std::vector<int> labels(dataset.flows.size());
  for (std::size_t i = 0; i < dataset.flows.size(); ++i)
    labels[i] = space.index_of(dataset.flows[i]);
  return labels;
}

BehaviorGraph load_matching_graph(const RunConfig& cfg, std::size_t flow_count) {
  BehaviorGraph graph = load_graph(cfg.graph_path);
  if (static_cast<std::size_t>(graph.size()) != flow_count)
    throw user_error("graph has " + std::to_string(graph.size()) + " nodes but the dataset has " +
                     std::to_string(flow_count) +
                     " flows; rebuild the graph from the same input, seed and sampling");
  return graph;
}

std::filesystem::path report_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.report_dir);
  return std::filesystem::path(cfg.report_dir) / name;
}

int quantile(const std::vector<int>& sorted, double q) {
  const auto idx = static_cast<std::size_t>(
      std::llround(q * static_cast<double>(sorted.size() - 1)));
  return sorted[idx];
}

struct LoadedModel {
  Checkpoint ckpt;
  Dataset dataset;
  SplitIndices splits;
  BehaviorGraph graph;
  Prediction prediction;
  std::vector<int> truth;
};

LoadedModel load_and_predict(const RunConfig& cfg) {
  LoadedModel lm;
  lm.ckpt = load_checkpoint(cfg.checkpoint);
  Prepared prep = prepare(cfg);
  lm.dataset = std::move(prep.dataset);
  lm.splits = std::move(prep.splits);
  lm.graph = load_matching_graph(cfg, lm.dataset.flows.size());
  if (lm.graph.config() != lm.ckpt.graph)
    throw user_error("graph file weights (lambda=" + format_double(lm.graph.config().lambda) +
                     ", mu=" + format_double(lm.graph.config().mu) + ", prefix=" +
                     std::to_string(lm.graph.config().prefix_len) +
                     ") differ from the checkpoint's");
  const Matrix X = normalize(lm.dataset.flows, lm.ckpt.norm);
  lm.prediction = predict(lm.ckpt.params, lm.ckpt.train, lm.graph, X, cfg.threads);
  lm.truth = node_labels(lm.dataset, lm.ckpt.labels);
  return lm;
}

const std::vector<int>& split_of(const SplitIndices& splits, const std::string& name) {
  if (name == "train") return splits.train;
  if (name == "val") return splits.val;
  if (name == "test") return splits.test;
  throw user_error("unknown split '" + name + "' (expected train, val or test)");
}

}  // namespace

void cmd_synth(const RunConfig& cfg, const std::string& out_override) {
  SynthSpec spec = cfg.synth;
  spec.seed = stage_seed(cfg, "synth");
  const Dataset dataset = generate_synthetic(spec);
  const std::string path = out_override.empty() ? cfg.input : out_override;
  save_flow_csv(path, dataset);
  std::cout << "synth: wrote " << dataset.flows.size() << " flows ("
            << spec.classes.size() << " classes) to " << path << '\n';
}

void cmd_build_graph(const RunConfig& cfg, bool oracle) {
  const Prepared prep = prepare(cfg);
  const BehaviorGraph graph =
      oracle ? build_graph_bruteforce(prep.dataset.flows, cfg.graph)
             : build_graph(prep.dataset.flows, cfg.graph, cfg.threads);
  save_graph(cfg.graph_path, graph);

  const auto counts = graph.edge_count_by_class();
  std::cout << "nodes=" << graph.size() << " edges=" << graph.edges().size()
            << " S=" << counts[0] << " M=" << counts[1] << " O=" << counts[2] << '\n';
  std::vector<int> degrees = graph.degrees();
  std::sort(degrees.begin(), degrees.end());
  if (!degrees.empty())
    std::cout << "degrees min=" << degrees.front() << " p25=" << quantile(degrees, 0.25)
              << " p50=" << quantile(degrees, 0.5) << " p75=" << quantile(degrees, 0.75)
              << " max=" << degrees.back() << '\n';
  try {
    std::cout << "gini=" << format_double(gini_coefficient(std::span<const int>(degrees)))
              << '\n';
  } catch (const user_error&) {
    std::cout << "gini=undefined (every node has degree zero)\n";
  }
}

void cmd_gini(const RunConfig& cfg) {
  const BehaviorGraph graph = load_graph(cfg.graph_path);
  const std::vector<int> degrees = graph.degrees();
  std::cout << format_double(gini_coefficient(std::span<const int>(degrees))) << '\n';
}

void cmd_train(const RunConfig& cfg) {
  Prepared prep = prepare(cfg);
  const BehaviorGraph graph = load_matching_graph(cfg, prep.dataset.flows.size());
  if (graph.config() != cfg.graph)
    std::cerr << "warning: graph file weights differ from graph_config; the file governs\n";

  const LabelSpace space = cfg.mode() == LabelSpace::Mode::binary
                               ? LabelSpace::binary()
                               : LabelSpace::from_flows(prep.dataset.flows,
                                                        LabelSpace::Mode::multiclass);
  std::vector<FlowRecord> train_flows;
  train_flows.reserve(prep.splits.train.size());
  for (int i : prep.splits.train) train_flows.push_back(prep.dataset.flows[i]);
  const NormalizationStats norm = fit_normalizer(train_flows, cfg.features, "train");
  const Matrix X = normalize(prep.dataset.flows, norm);
  const std::vector<int> labels = node_labels(prep.dataset, space);

  TrainConfig tc = cfg.train;
  tc.seed = stage_seed(cfg, "train");

  TrainInputs inputs;
  inputs.graph = &graph;
  inputs.features = &X;
  inputs.labels = labels;
  inputs.train_nodes = prep.splits.train;
  inputs.val_nodes = prep.splits.val;
  inputs.label_space = space;
  inputs.norm = norm;

  const TrainResult result = train_model(inputs, tc, cfg.threads);
  save_checkpoint(cfg.checkpoint, result.best);

  std::ofstream log(report_path(cfg, "train_log.jsonl"), std::ios::binary);
  if (!log) throw user_error("cannot write training log in '" + cfg.report_dir + "'");
  for (const EpochLog& entry : result.log) {
    json line = {{"epoch", entry.epoch},
                 {"train_loss", entry.train_loss},
                 {"val_accuracy", entry.val_accuracy},
                 {"val_weighted_f1", entry.val_weighted_f1},
                 {"best", entry.best}};
    const std::string text = line.dump();
    log << text << '\n';
    std::cout << text << '\n';
  }
  std::cout << "train: best_epoch=" << result.best_epoch
            << " checkpoint=" << cfg.checkpoint << '\n';
}

void cmd_eval(const RunConfig& cfg, const std::string& split) {
  const LoadedModel lm = load_and_predict(cfg);
  const std::vector<int>& nodes = split_of(lm.splits, split);
  if (nodes.empty()) throw user_error("split '" + split + "' is empty");

  auto report_for = [&](const std::vector<int>& subset) {
    std::vector<int> truth(subset.size()), pred(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
      truth[i] = lm.truth[subset[i]];
      pred[i] = lm.prediction.labels[subset[i]];
    }
    return classification_metrics(truth, pred, lm.ckpt.labels);
  };
  const EvalReport report = report_for(nodes);

  const auto path = report_path(cfg, "eval_" + split + ".json");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw user_error("cannot write report '" + path.string() + "'");
  out << report_to_json(report);
  std::cout << report_to_table(report);

  if (split == "train" && !lm.splits.test.empty()) {
    const EvalReport test_report = report_for(lm.splits.test);
    if (report.weighted_f1 < test_report.weighted_f1)
      std::cerr << "warning: training-split weighted F1 ("
                << format_double(report.weighted_f1) << ") is below the test split's ("
                << format_double(test_report.weighted_f1)
                << "); check that graph, checkpoint and seed belong together\n";
  }
}

void cmd_export_embeddings(const RunConfig& cfg, const std::string& out_override) {
  const LoadedModel lm = load_and_predict(cfg);
  const std::string path =
      out_override.empty() ? report_path(cfg, "embeddings.csv").string() : out_override;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw user_error("cannot write embeddings file '" + path + "'");
  write_embeddings_csv(out, lm.prediction.embeddings, lm.truth, lm.prediction.labels);
  std::cout << "embeddings: wrote " << lm.prediction.embeddings.rows << " rows to " << path
            << '\n';
}

}  // namespace bsgat
