#pragma once

#include <random>
#include <span>
#include <vector>

#include "bsgat/graph.hpp"
#include "bsgat/la.hpp"
#include "bsgat/model.hpp"

namespace bsgat {

// Gather plan for one attention layer. Rows over in_nodes are consumed and
// rows over out_nodes produced; members index into in_nodes, with each
// output node's own slot first and its neighbors following in ascending
// node order.
struct LevelBlock {
  std::vector<int> in_nodes;
  std::vector<int> out_nodes;
  std::vector<int> offsets;  // out_nodes.size() + 1 slot offsets
  std::vector<int> members;  // positions into in_nodes
  std::vector<double> eb;    // behavior weight per slot; the self slot gets 1
};

// Layered frontier for a set of target nodes: the last level outputs exactly
// the targets, every earlier level adds the 1-hop neighborhood needed to
// feed the level above.  With zero layers the plan is just the target rows.
struct BatchPlan {
  std::vector<int> targets;        // sorted, unique
  std::vector<LevelBlock> levels;  // one per attention layer

  const std::vector<int>& input_nodes() const {
    return levels.empty() ? targets : levels.front().in_nodes;
  }
};

BatchPlan make_plan(const BehaviorGraph& graph, std::span<const int> targets, int layers);

struct HeadCache {
  Matrix Z;          // in_count x out_dim, z = h W
  Vector score_self; // a's first half dotted with each Z row
  Vector score_peer; // a's second half dotted with each Z row
  Vector raw;        // per slot, logit before LeakyReLU
  Vector alpha;      // per slot, normalized coefficient before dropout
  Vector attn_mask;  // per slot multiplier; empty when not dropping
};

struct LayerCache {
  Matrix H_in;       // layer input after dropout
  Vector in_mask;    // elementwise multiplier; empty when not dropping
  std::vector<HeadCache> heads;
  Matrix pre;        // head average before ELU, out_count x out_dim
  Matrix H_out;      // ELU(pre)
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix dense_in;  // classifier input, one row per target
  Matrix logits;    // targets x num_classes
};

// Runs the stacked attention layers and the dense head over the plan.
// training=true draws dropout masks from rng (required when cfg.dropout > 0)
// and caches them for backward; otherwise the pass is deterministic.
ForwardCache forward(const ModelParams& params, const TrainConfig& cfg, const Matrix& X,
                     const BatchPlan& plan, bool training, std::mt19937_64* rng,
                     int threads = 1);

// Mean cross-entropy over rows, max-subtracted.
double loss_value(const Matrix& logits, std::span<const int> labels);

// Accumulates exact gradients of loss_value into grads (caller zeroes).
// Reuses the dropout masks cached by the forward pass.
void backward(const ModelParams& params, const TrainConfig& cfg, const Matrix& X,
              const BatchPlan& plan, const ForwardCache& cache,
              std::span<const int> labels, ModelParams& grads, int threads = 1);

Matrix softmax_rows(const Matrix& logits);
std::vector<int> argmax_rows(const Matrix& values);  // ties go to the lowest index

// Reference per-node operations against the full graph, no dropout.  The
// batched forward must reproduce them row for row.
// Returns one coefficient vector per head over {node} ∪ N(node), self first.
std::vector<Vector> attention_coefficients(const LayerParams& layer, const Matrix& feats,
                                           const BehaviorGraph& graph, int node,
                                           AttentionMode mode, double leaky_slope = 0.2);
Vector aggregate(const std::vector<Vector>& alpha, const LayerParams& layer,
                 const Matrix& feats, const BehaviorGraph& graph, int node,
                 AttentionMode mode);

struct Prediction {
  std::vector<int> labels;
  Matrix probabilities;  // rows sum to 1
  Matrix embeddings;     // classifier input per node
};

// Eval-mode forward over every node of the graph.
Prediction predict(const ModelParams& params, const TrainConfig& cfg,
                   const BehaviorGraph& graph, const Matrix& X, int threads = 1);

}  // namespace bsgat
