#pragma once

#include <span>
#include <vector>

#include "bsgat/engine.hpp"
#include "bsgat/flow.hpp"
#include "bsgat/graph.hpp"
#include "bsgat/la.hpp"
#include "bsgat/model.hpp"

namespace bsgat {

struct EpochLog {
  int epoch = 0;           // 1-based
  double train_loss = 0.0; // per-target-node mean over the epoch
  double val_accuracy = 0.0;
  double val_weighted_f1 = 0.0;
  bool best = false;       // this epoch improved the retained checkpoint
  bool operator==(const EpochLog&) const = default;
};

struct TrainInputs {
  const BehaviorGraph* graph = nullptr;
  const Matrix* features = nullptr;   // one row per node, already normalized
  std::span<const int> labels;        // class index per node
  std::span<const int> train_nodes;
  std::span<const int> val_nodes;     // may be empty; then the last epoch wins
  LabelSpace label_space;
  NormalizationStats norm;            // carried into the checkpoint
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  int best_epoch = 0;  // 0 = initialization (epochs == 0 or no improvement)
};

// Minibatch training: each step samples cfg.minibatch target nodes from the
// shuffled training set, aggregates their full 1-hop neighborhood per layer,
// and takes one Adam step on the loss over the targets alone.  The retained
// checkpoint is the one with the best validation weighted F1 (first such
// epoch on ties).  Aborts with a diagnostic when the loss leaves the finite
// range.  Fixed seed, fixed result, regardless of thread count.
TrainResult train_model(const TrainInputs& in, const TrainConfig& cfg, int threads = 1);

}  // namespace bsgat
