#pragma once

#include <cstdint>
#include <string>

#include "bsgat/dataset.hpp"
#include "bsgat/flow.hpp"
#include "bsgat/graph.hpp"
#include "bsgat/model.hpp"

namespace bsgat {

// Out-of-the-box synthetic traffic: one benign majority class and three
// attack classes with distinct source pools and destination services.
inline SynthSpec default_synth() {
  SynthSpec spec;
  spec.hosts = 40;
  spec.subnets = 4;
  spec.feature_dim = 8;
  spec.classes = {
      SynthClassSpec{"Benign", false, 700, 24, 6, 0, 1.0},
      SynthClassSpec{"DoS", true, 240, 6, 2, 2, 1.0},
      SynthClassSpec{"Recon", true, 160, 6, 3, 2, 1.0},
      SynthClassSpec{"Theft", true, 100, 4, 2, 1, 1.0},
  };
  return spec;
}

// One config drives every subcommand; commands read only the keys they
// document.  A single global seed deterministically derives the per-stage
// seeds (sampling, splitting, training, synthesis).
struct RunConfig {
  std::string input = "flows.csv";
  std::string graph_path = "graph.edges";
  std::string checkpoint = "model.ckpt";
  std::string report_dir = ".";
  std::string label_mode = "multiclass";  // or "binary"
  std::uint64_t seed = 1;
  int threads = 1;

  DatasetSchema schema;
  SamplingPolicy sampling;
  SplitSpec split;
  GraphConfig graph;
  TrainConfig train;
  FeatureOptions features;
  SynthSpec synth = default_synth();

  LabelSpace::Mode mode() const;
  void validate() const;
};

// Defaults when path is empty; otherwise the file must exist and parse.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);

// Derived per-stage seeds, exposed so tests can pin them.
std::uint64_t stage_seed(const RunConfig& cfg, const char* stage);

// Commands throw on failure (user_error for bad input/config, runtime_error
// for numeric trouble); the CLI maps exception type to exit status.
void cmd_synth(const RunConfig& cfg, const std::string& out_override = "");
void cmd_build_graph(const RunConfig& cfg, bool oracle = false);
void cmd_gini(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg, const std::string& split = "test");
void cmd_export_embeddings(const RunConfig& cfg, const std::string& out_override = "");

}  // namespace bsgat
