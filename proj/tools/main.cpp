#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bsgat/errors.hpp"
#include "bsgat/pipeline.hpp"

namespace {

constexpr const char* kSeedHelp = "Global seed; per-stage seeds derive from it";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior-similarity graphs and graph attention for NetFlow classification"};
  app.require_subcommand(1);

  std::string config_path;
  if (const char* env = std::getenv("BSGAT_CONFIG")) config_path = env;
  app.add_option("-c,--config", config_path,
                 "JSON config file (also via BSGAT_CONFIG); flags override its keys");

  std::uint64_t seed = 0;
  int threads = 0;
  std::string input, graph_path, checkpoint, report_dir, out_path, label_mode;
  double fraction = 0.0, lambda = 0.0, mu = 0.0, lr = 0.0, dropout = 0.0;
  int prefix = 0, epochs = -1, hidden = 0, layers = -1, heads = 0, minibatch = 0;
  std::string attention, split_name = "test";
  bool oracle = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled flow CSV");
  synth->footer("Config keys: input (output location unless --out), seed, synth.*");
  auto* synth_out = synth->add_option("--out", out_path, "Write the CSV here instead of the config's input path");
  auto* synth_seed = synth->add_option("--seed", seed, kSeedHelp);

  auto* build = app.add_subcommand("build-graph",
                                   "Build the behavior-similarity graph from a flow CSV");
  build->footer("Config keys: input, graph, seed, threads, column_roles, sampling.*, "
                "graph_config.*");
  auto* build_input = build->add_option("--input", input, "Flow CSV to read");
  auto* build_output = build->add_option("--output", graph_path, "Edge-list file to write");
  build->add_flag("--oracle", oracle,
                  "Use the quadratic reference construction instead of the hashed one");
  auto* build_lambda = build->add_option("--lambda", lambda, "Weight of same-subnet (M) edges");
  auto* build_mu = build->add_option("--mu", mu, "Weight of cross-subnet (O) edges");
  auto* build_prefix = build->add_option("--prefix", prefix, "Subnet mask length on src_ip");
  auto* build_fraction =
      build->add_option("--fraction", fraction, "Per-class sampling fraction in (0, 1]");
  auto* build_seed = build->add_option("--seed", seed, kSeedHelp);
  auto* build_threads = build->add_option("--threads", threads, "Worker threads");

  auto* gini = app.add_subcommand("gini", "Print the Gini coefficient of a graph's degrees");
  gini->footer("Config keys: graph");
  auto* gini_graph = gini->add_option("--graph", graph_path, "Edge-list file to read");

  auto* train = app.add_subcommand("train", "Train the attention model on the train split");
  train->footer("Config keys: input, graph, checkpoint, report_dir, label_mode, seed, "
                "threads, column_roles, sampling.*, split.*, graph_config.*, "
                "train_config.*, features.*");
  auto* train_input = train->add_option("--input", input, "Flow CSV to read");
  auto* train_graph = train->add_option("--graph", graph_path, "Edge-list file to read");
  auto* train_ckpt = train->add_option("--checkpoint", checkpoint, "Checkpoint file to write");
  auto* train_report = train->add_option("--report-dir", report_dir,
                                         "Directory for train_log.jsonl");
  auto* train_label = train->add_option("--label-mode", label_mode, "binary or multiclass");
  auto* train_epochs = train->add_option("--epochs", epochs, "Training epochs");
  auto* train_lr = train->add_option("--lr", lr, "Adam learning rate");
  auto* train_hidden = train->add_option("--hidden", hidden, "Hidden width per layer");
  auto* train_layers = train->add_option("--layers", layers,
                                         "Attention layers (0 = dense head on raw features)");
  auto* train_heads = train->add_option("--heads", heads, "Attention heads per layer");
  auto* train_minibatch = train->add_option("--minibatch", minibatch,
                                            "Target nodes per optimizer step");
  auto* train_dropout = train->add_option("--dropout", dropout, "Dropout rate in [0, 1)");
  auto* train_mode = train->add_option("--mode", attention,
                                       "Attention mode: eq5, eq6 or plain");
  auto* train_fraction =
      train->add_option("--fraction", fraction, "Per-class sampling fraction in (0, 1]");
  auto* train_seed = train->add_option("--seed", seed, kSeedHelp);
  auto* train_threads = train->add_option("--threads", threads, "Worker threads");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  eval->footer("Config keys: input, graph, checkpoint, report_dir, seed, threads, "
               "column_roles, sampling.*, split.*");
  auto* eval_input = eval->add_option("--input", input, "Flow CSV to read");
  auto* eval_graph = eval->add_option("--graph", graph_path, "Edge-list file to read");
  auto* eval_ckpt = eval->add_option("--checkpoint", checkpoint, "Checkpoint file to read");
  auto* eval_report = eval->add_option("--report-dir", report_dir,
                                       "Directory for eval_<split>.json");
  eval->add_option("--split", split_name, "train, val or test")->capture_default_str();
  auto* eval_seed = eval->add_option("--seed", seed, kSeedHelp);
  auto* eval_threads = eval->add_option("--threads", threads, "Worker threads");

  auto* exp = app.add_subcommand("export-embeddings",
                                 "Write per-node classifier inputs as CSV");
  exp->footer("Config keys: input, graph, checkpoint, report_dir (default output "
              "location), seed, threads, column_roles, sampling.*, split.*");
  auto* exp_input = exp->add_option("--input", input, "Flow CSV to read");
  auto* exp_graph = exp->add_option("--graph", graph_path, "Edge-list file to read");
  auto* exp_ckpt = exp->add_option("--checkpoint", checkpoint, "Checkpoint file to read");
  auto* exp_out = exp->add_option("--out", out_path,
                                  "Write here instead of report_dir/embeddings.csv");
  auto* exp_seed = exp->add_option("--seed", seed, kSeedHelp);
  auto* exp_threads = exp->add_option("--threads", threads, "Worker threads");

  // lets -c/--config appear after the subcommand name
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help and version succeed; bad usage is a user error
  }

  try {
    bsgat::RunConfig cfg = bsgat::load_run_config(config_path);

    auto set_if = [](const CLI::Option* opt, auto& dst, const auto& src) {
      if (opt->count() > 0) dst = src;
    };
    set_if(synth_seed, cfg.seed, seed);
    set_if(build_input, cfg.input, input);
    set_if(build_output, cfg.graph_path, graph_path);
    set_if(build_lambda, cfg.graph.lambda, lambda);
    set_if(build_mu, cfg.graph.mu, mu);
    set_if(build_prefix, cfg.graph.prefix_len, prefix);
    set_if(build_fraction, cfg.sampling.fraction, fraction);
    set_if(build_seed, cfg.seed, seed);
    set_if(build_threads, cfg.threads, threads);
    set_if(gini_graph, cfg.graph_path, graph_path);
    set_if(train_input, cfg.input, input);
    set_if(train_graph, cfg.graph_path, graph_path);
    set_if(train_ckpt, cfg.checkpoint, checkpoint);
    set_if(train_report, cfg.report_dir, report_dir);
    set_if(train_label, cfg.label_mode, label_mode);
    set_if(train_epochs, cfg.train.epochs, epochs);
    set_if(train_lr, cfg.train.learning_rate, lr);
    set_if(train_hidden, cfg.train.hidden, hidden);
    set_if(train_layers, cfg.train.layers, layers);
    set_if(train_heads, cfg.train.heads, heads);
    set_if(train_minibatch, cfg.train.minibatch, minibatch);
    set_if(train_dropout, cfg.train.dropout, dropout);
    if (train_mode->count() > 0)
      cfg.train.attention = bsgat::attention_mode_from_string(attention);
    set_if(train_fraction, cfg.sampling.fraction, fraction);
    set_if(train_seed, cfg.seed, seed);
    set_if(train_threads, cfg.threads, threads);
    set_if(eval_input, cfg.input, input);
    set_if(eval_graph, cfg.graph_path, graph_path);
    set_if(eval_ckpt, cfg.checkpoint, checkpoint);
    set_if(eval_report, cfg.report_dir, report_dir);
    set_if(eval_seed, cfg.seed, seed);
    set_if(eval_threads, cfg.threads, threads);
    set_if(exp_input, cfg.input, input);
    set_if(exp_graph, cfg.graph_path, graph_path);
    set_if(exp_ckpt, cfg.checkpoint, checkpoint);
    set_if(exp_out, out_path, out_path);  // no config slot; flag only
    set_if(exp_seed, cfg.seed, seed);
    set_if(exp_threads, cfg.threads, threads);
    cfg.validate();

    if (synth->parsed()) {
      bsgat::cmd_synth(cfg, synth_out->count() > 0 ? out_path : "");
    } else if (build->parsed()) {
      bsgat::cmd_build_graph(cfg, oracle);
    } else if (gini->parsed()) {
      bsgat::cmd_gini(cfg);
    } else if (train->parsed()) {
      bsgat::cmd_train(cfg);
    } else if (eval->parsed()) {
      bsgat::cmd_eval(cfg, split_name);
    } else if (exp->parsed()) {
      bsgat::cmd_export_embeddings(cfg, exp_out->count() > 0 ? out_path : "");
    }
    return 0;
  } catch (const bsgat::user_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
