#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <span>
#include <string>
#include <vector>

#include "bsgat/errors.hpp"
#include "bsgat/graph.hpp"
#include "bsgat/metrics.hpp"
#include "bsgat/pipeline.hpp"

namespace py = pybind11;

namespace {

bsgat::RunConfig config_from_json(const std::string& text) {
  return text.empty() ? bsgat::RunConfig{} : bsgat::parse_run_config(text);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Behavior-similarity graphs and graph attention for NetFlow records";

  // bad input or config surfaces as ValueError, numeric trouble as RuntimeError
  py::register_exception<bsgat::user_error>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "gini",
      [](const std::vector<double>& values) {
        return bsgat::gini_coefficient(std::span<const double>(values));
      },
      py::arg("values"),
      "Exact Gini coefficient of a non-negative sequence (Lorenz trapezoids).");

  m.def(
      "synth",
      [](const std::string& config, const std::string& out) {
        bsgat::cmd_synth(config_from_json(config), out);
      },
      py::arg("config") = "", py::arg("out") = "",
      "Generate a synthetic labeled flow CSV. config is the JSON run config "
      "as text; out overrides the output path.");

  m.def(
      "build_graph",
      [](const std::string& config, bool oracle) {
        bsgat::cmd_build_graph(config_from_json(config), oracle);
      },
      py::arg("config") = "", py::arg("oracle") = false,
      "Build the behavior-similarity graph from the configured flow CSV.");

  m.def(
      "train",
      [](const std::string& config) { bsgat::cmd_train(config_from_json(config)); },
      py::arg("config") = "",
      "Train the attention model; writes the checkpoint and training log.");

  m.def(
      "evaluate",
      [](const std::string& config, const std::string& split) {
        bsgat::cmd_eval(config_from_json(config), split);
      },
      py::arg("config") = "", py::arg("split") = "test",
      "Evaluate the configured checkpoint on one split; writes the JSON report.");

  m.def(
      "export_embeddings",
      [](const std::string& config, const std::string& out) {
        bsgat::cmd_export_embeddings(config_from_json(config), out);
      },
      py::arg("config") = "", py::arg("out") = "",
      "Write per-node classifier inputs with true and predicted labels as CSV.");

  m.def(
      "degree_histogram",
      [](const std::string& graph_path) { return bsgat::load_graph(graph_path).degrees(); },
      py::arg("graph_path"), "Per-node degree list of a saved graph file.");

  m.def(
      "edge_counts",
      [](const std::string& graph_path) {
        const auto counts = bsgat::load_graph(graph_path).edge_count_by_class();
        py::dict out;
        out["S"] = counts[0];
        out["M"] = counts[1];
        out["O"] = counts[2];
        return out;
      },
      py::arg("graph_path"), "Edge counts of a saved graph file, keyed by class.");
}
