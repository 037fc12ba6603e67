#include "bsgat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "bsgat/errors.hpp"
#include "bsgat/metrics.hpp"

namespace bsgat {

TrainResult train_model(const TrainInputs& in, const TrainConfig& cfg, int threads) {
  cfg.validate();
  if (in.graph == nullptr || in.features == nullptr)
    throw std::runtime_error("trainer needs a graph and a feature matrix");
  const BehaviorGraph& graph = *in.graph;
  const Matrix& X = *in.features;
  if (X.rows != graph.size())
    throw user_error("feature rows (" + std::to_string(X.rows) + ") and graph nodes (" +
                     std::to_string(graph.size()) + ") differ");
  if (in.labels.size() != static_cast<std::size_t>(graph.size()))
    throw user_error("label count does not match the node count");
  if (in.train_nodes.empty()) throw user_error("empty training split");
  const int C = in.label_space.size();
  for (int node : in.train_nodes)
    if (node < 0 || node >= graph.size())
      throw user_error("training node index out of range");
  for (int node : in.val_nodes)
    if (node < 0 || node >= graph.size())
      throw user_error("validation node index out of range");

  ModelParams params = init_params(X.cols, C, cfg, cfg.seed);
  AdamState adam = AdamState::init(params);
  ModelParams grads = zeros_like(params);

  // independent streams so adding an epoch never perturbs mask draws
  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 1));
  std::mt19937_64 dropout_rng(mix_seed(cfg.seed, 2));

  TrainResult result;
  result.best = Checkpoint{cfg, graph.config(), in.label_space, in.norm, params};

  std::vector<int> order(in.train_nodes.begin(), in.train_nodes.end());
  std::vector<int> val_truth(in.val_nodes.size());
  for (std::size_t i = 0; i < in.val_nodes.size(); ++i)
    val_truth[i] = in.labels[in.val_nodes[i]];
  BatchPlan val_plan;
  if (!in.val_nodes.empty()) val_plan = make_plan(graph, in.val_nodes, cfg.layers);

  double best_f1 = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      const std::size_t stop = std::min(order.size(), start + cfg.minibatch);
      const std::span<const int> chunk(order.data() + start, stop - start);
      const BatchPlan plan = make_plan(graph, chunk, cfg.layers);
      std::vector<int> truth(plan.targets.size());
      for (std::size_t i = 0; i < plan.targets.size(); ++i)
        truth[i] = in.labels[plan.targets[i]];

      ForwardCache cache =
          forward(params, cfg, X, plan, /*training=*/true, &dropout_rng, threads);
      const double batch_loss = loss_value(cache.logits, truth);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      loss_sum += batch_loss * static_cast<double>(truth.size());
      zero_params(grads);
      backward(params, cfg, X, plan, cache, truth, grads, threads);
      adam_step(params, grads, adam, cfg.learning_rate);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    if (!in.val_nodes.empty()) {
      ForwardCache cache =
          forward(params, cfg, X, val_plan, /*training=*/false, nullptr, threads);
      const std::vector<int> pred = argmax_rows(cache.logits);
      const EvalReport report = classification_metrics(val_truth, pred, in.label_space);
      entry.val_accuracy = report.accuracy;
      entry.val_weighted_f1 = report.weighted_f1;
      if (entry.val_weighted_f1 > best_f1) {
        best_f1 = entry.val_weighted_f1;
        entry.best = true;
        result.best.params = params;
        result.best_epoch = epoch;
      }
    } else if (epoch == cfg.epochs) {
      // nothing to select on; keep the final state
      entry.best = true;
      result.best.params = params;
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
  }
  return result;
}

}  // namespace bsgat
