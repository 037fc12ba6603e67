#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsgat/flow.hpp"
#include "bsgat/graph.hpp"
#include "bsgat/la.hpp"

namespace bsgat {

// eq5: behavior weights scale the attention softmax terms (the default).
// eq6: eq5's coefficients and an extra eb factor on every aggregation summand.
// plain: unweighted attention; the graph contributes structure only.
enum class AttentionMode { eq5, eq6, plain };

std::string to_string(AttentionMode mode);
AttentionMode attention_mode_from_string(const std::string& name);

struct TrainConfig {
  double learning_rate = 0.002;
  double dropout = 0.2;  // on layer inputs and attention coefficients, train mode only
  int hidden = 128;      // per-layer output width
  int layers = 2;        // attention layers; 0 trains the dense head on raw features
  int minibatch = 500;   // target nodes per optimizer step
  int epochs = 1000;
  int heads = 3;         // attention heads, averaged
  double leaky_slope = 0.2;
  AttentionMode attention = AttentionMode::eq5;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct HeadParams {
  Matrix W;  // in_dim x out_dim, applied as z = h W
  Vector a;  // length 2*out_dim; first half scores the center, second the member
  bool operator==(const HeadParams&) const = default;
};

struct LayerParams {
  std::vector<HeadParams> heads;

  int in_dim() const { return heads.empty() ? 0 : heads.front().W.rows; }
  int out_dim() const { return heads.empty() ? 0 : heads.front().W.cols; }
  bool operator==(const LayerParams&) const = default;
};

struct DenseParams {
  Matrix W;  // in_dim x num_classes
  Vector b;  // length num_classes
  bool operator==(const DenseParams&) const = default;
};

struct ModelParams {
  std::vector<LayerParams> gat;
  DenseParams dense;

  int input_dim() const { return gat.empty() ? dense.W.rows : gat.front().in_dim(); }
  int num_classes() const { return dense.W.cols; }
  bool operator==(const ModelParams&) const = default;
};

// Flat view of every parameter tensor in checkpoint order: for each layer,
// for each head, W then a; finally the dense W and bias.
struct TensorRef {
  std::string name;
  std::vector<double>* data = nullptr;
  int rows = 0;
  int cols = 0;  // 1 for vectors
};
struct TensorView {
  std::string name;
  const std::vector<double>* data = nullptr;
  int rows = 0;
  int cols = 0;
};
std::vector<TensorRef> tensor_refs(ModelParams& params);
std::vector<TensorView> tensor_views(const ModelParams& params);

// Glorot-uniform weights drawn in checkpoint tensor order; biases zero.
ModelParams init_params(int input_dim, int num_classes, const TrainConfig& cfg,
                        std::uint64_t seed);

ModelParams zeros_like(const ModelParams& params);
void zero_params(ModelParams& params);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<Vector> m;  // first moments, one per tensor in checkpoint order
  std::vector<Vector> v;  // second moments

  static AdamState init(const ModelParams& params);
};

// Bias-corrected Adam update. Rejects non-finite gradients.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

// Everything needed to reload and apply a trained model: raw tensors plus
// the configuration, label space and normalization that shaped them.
struct Checkpoint {
  TrainConfig train;
  GraphConfig graph;
  LabelSpace labels;
  NormalizationStats norm;
  ModelParams params;
};

// One JSON header line, then each tensor as little-endian 64-bit floats.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bsgat
