#include "bsgat/engine.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "bsgat/errors.hpp"

namespace bsgat {

namespace {

// C = A * B
void matmul(const Matrix& A, const Matrix& B, Matrix& C, int threads) {
  C = Matrix(A.rows, B.cols);
  parallel_for(A.rows, threads, [&](int i) {
    double* out = C.row(i);
    const double* a = A.row(i);
    for (int k = 0; k < A.cols; ++k)
      if (a[k] != 0.0) axpy(a[k], B.row(k), out, B.cols);
  });
}

// C = A * B^T
void matmul_bt(const Matrix& A, const Matrix& B, Matrix& C, int threads) {
  C = Matrix(A.rows, B.rows);
  parallel_for(A.rows, threads, [&](int i) {
    for (int j = 0; j < B.rows; ++j) C(i, j) = dot(A.row(i), B.row(j), A.cols);
  });
}

// C += A^T * B; each output row is one complete, ordered sum so the result
// does not depend on the thread count
void matmul_at_accum(const Matrix& A, const Matrix& B, Matrix& C, int threads) {
  parallel_for(A.cols, threads, [&](int r) {
    double* out = C.row(r);
    for (int k = 0; k < A.rows; ++k) axpy(A(k, r), B.row(k), out, B.cols);
  });
}

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }
double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

// softmax over values[first, last) in place, max-subtracted
void softmax_span(double* values, int count) {
  double max = values[0];
  for (int s = 1; s < count; ++s) max = std::max(max, values[s]);
  double sum = 0.0;
  for (int s = 0; s < count; ++s) {
    values[s] = std::exp(values[s] - max);
    sum += values[s];
  }
  for (int s = 0; s < count; ++s) values[s] /= sum;
}

Vector draw_mask(std::mt19937_64& rng, std::size_t count, double rate) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector mask(count);
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < count; ++i) mask[i] = unit(rng) < rate ? 0.0 : scale;
  return mask;
}

Matrix gather_rows(const Matrix& X, std::span<const int> nodes) {
  Matrix out(static_cast<int>(nodes.size()), X.cols);
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const double* src = X.row(nodes[r]);
    std::copy(src, src + X.cols, out.row(static_cast<int>(r)));
    for (int c = 0; c < X.cols; ++c)
      if (!std::isfinite(src[c]))
        throw user_error("non-finite feature input at node " + std::to_string(nodes[r]));
  }
  return out;
}

}  // namespace

BatchPlan make_plan(const BehaviorGraph& graph, std::span<const int> targets, int layers) {
  if (targets.empty()) throw user_error("empty target set");
  if (layers < 0) throw user_error("layer count must be non-negative");
  BatchPlan plan;
  plan.targets.assign(targets.begin(), targets.end());
  std::sort(plan.targets.begin(), plan.targets.end());
  plan.targets.erase(std::unique(plan.targets.begin(), plan.targets.end()),
                     plan.targets.end());
  for (int t : plan.targets)
    if (t < 0 || t >= graph.size())
      throw user_error("target node " + std::to_string(t) + " out of range");
  if (layers == 0) return plan;

  // frontier sets from the top: each level needs its outputs' 1-hop inputs
  std::vector<std::vector<int>> sets(layers + 1);
  sets[layers] = plan.targets;
  for (int l = layers; l >= 1; --l) {
    std::vector<int> wide = sets[l];
    for (int u : sets[l])
      for (const NeighborEntry& nb : graph.neighbors(u)) wide.push_back(nb.node);
    std::sort(wide.begin(), wide.end());
    wide.erase(std::unique(wide.begin(), wide.end()), wide.end());
    sets[l - 1] = std::move(wide);
  }

  plan.levels.resize(layers);
  for (int l = 0; l < layers; ++l) {
    LevelBlock& block = plan.levels[l];
    block.in_nodes = sets[l];
    block.out_nodes = sets[l + 1];
    std::unordered_map<int, int> pos;
    pos.reserve(block.in_nodes.size());
    for (std::size_t p = 0; p < block.in_nodes.size(); ++p)
      pos[block.in_nodes[p]] = static_cast<int>(p);
    block.offsets.push_back(0);
    for (int u : block.out_nodes) {
      block.members.push_back(pos.at(u));
      block.eb.push_back(1.0);
      for (const NeighborEntry& nb : graph.neighbors(u)) {
        block.members.push_back(pos.at(nb.node));
        block.eb.push_back(nb.eb);
      }
      block.offsets.push_back(static_cast<int>(block.members.size()));
    }
  }
  return plan;
}

ForwardCache forward(const ModelParams& params, const TrainConfig& cfg, const Matrix& X,
                     const BatchPlan& plan, bool training, std::mt19937_64* rng,
                     int threads) {
  const int layers = static_cast<int>(params.gat.size());
  if (static_cast<int>(plan.levels.size()) != layers)
    throw user_error("plan depth " + std::to_string(plan.levels.size()) +
                     " does not match model depth " + std::to_string(layers));
  if (X.cols != params.input_dim())
    throw user_error("feature width " + std::to_string(X.cols) +
                     " does not match model input " + std::to_string(params.input_dim()));
  const bool dropping = training && cfg.dropout > 0.0;
  if (dropping && rng == nullptr)
    throw user_error("training with dropout needs a random source");

  ForwardCache cache;
  if (layers == 0) {
    cache.dense_in = gather_rows(X, plan.targets);
  } else {
    Matrix H_source = gather_rows(X, plan.levels.front().in_nodes);
    for (int l = 0; l < layers; ++l) {
      const LevelBlock& block = plan.levels[l];
      const LayerParams& layer = params.gat[l];
      const int in_count = static_cast<int>(block.in_nodes.size());
      const int out_count = static_cast<int>(block.out_nodes.size());
      const int F_out = layer.out_dim();
      const int K = static_cast<int>(layer.heads.size());
      const std::size_t slots = block.members.size();

      LayerCache lc;
      lc.H_in = std::move(H_source);
      if (dropping) {
        lc.in_mask = draw_mask(*rng, lc.H_in.data.size(), cfg.dropout);
        for (std::size_t i = 0; i < lc.H_in.data.size(); ++i)
          lc.H_in.data[i] *= lc.in_mask[i];
      }
      lc.heads.resize(K);
      // all mask draws happen here, single-threaded, so the random stream
      // is independent of how the later loops are parallelized
      if (dropping)
        for (int k = 0; k < K; ++k)
          lc.heads[k].attn_mask = draw_mask(*rng, slots, cfg.dropout);

      for (int k = 0; k < K; ++k) {
        HeadCache& hc = lc.heads[k];
        const HeadParams& head = layer.heads[k];
        matmul(lc.H_in, head.W, hc.Z, threads);
        hc.score_self.resize(in_count);
        hc.score_peer.resize(in_count);
        const double* a_self = head.a.data();
        const double* a_peer = head.a.data() + F_out;
        parallel_for(in_count, threads, [&](int r) {
          hc.score_self[r] = dot(a_self, hc.Z.row(r), F_out);
          hc.score_peer[r] = dot(a_peer, hc.Z.row(r), F_out);
        });
        hc.raw.resize(slots);
        hc.alpha.resize(slots);
        parallel_for(out_count, threads, [&](int o) {
          const int first = block.offsets[o];
          const int last = block.offsets[o + 1];
          const int self_pos = block.members[first];
          for (int s = first; s < last; ++s) {
            hc.raw[s] = hc.score_self[self_pos] + hc.score_peer[block.members[s]];
            hc.alpha[s] = leaky_relu(hc.raw[s], cfg.leaky_slope);
            if (cfg.attention != AttentionMode::plain)
              hc.alpha[s] += std::log(block.eb[s]);
          }
          softmax_span(hc.alpha.data() + first, last - first);
        });
      }

      lc.pre = Matrix(out_count, F_out);
      lc.H_out = Matrix(out_count, F_out);
      parallel_for(out_count, threads, [&](int o) {
        double* pre = lc.pre.row(o);
        for (int k = 0; k < K; ++k) {
          const HeadCache& hc = lc.heads[k];
          for (int s = block.offsets[o]; s < block.offsets[o + 1]; ++s) {
            double coeff = hc.alpha[s];
            if (!hc.attn_mask.empty()) coeff *= hc.attn_mask[s];
            if (cfg.attention == AttentionMode::eq6) coeff *= block.eb[s];
            if (coeff != 0.0) axpy(coeff, hc.Z.row(block.members[s]), pre, F_out);
          }
        }
        double* out = lc.H_out.row(o);
        for (int c = 0; c < F_out; ++c) {
          pre[c] /= K;
          out[c] = elu(pre[c]);
        }
      });

      H_source = lc.H_out;  // next layer's input rows, aligned by construction
      cache.layers.push_back(std::move(lc));
    }
    cache.dense_in = std::move(H_source);
  }

  if (cache.dense_in.cols != params.dense.W.rows)
    throw user_error("classifier input width mismatch");
  matmul(cache.dense_in, params.dense.W, cache.logits, threads);
  parallel_for(cache.logits.rows, threads, [&](int r) {
    double* row = cache.logits.row(r);
    for (int c = 0; c < cache.logits.cols; ++c) row[c] += params.dense.b[c];
  });
  return cache;
}

double loss_value(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != static_cast<std::size_t>(logits.rows))
    throw user_error("label count does not match logit rows");
  if (logits.rows == 0) throw user_error("cannot average a loss over zero rows");
  double total = 0.0;
  for (int r = 0; r < logits.rows; ++r) {
    const int y = labels[r];
    if (y < 0 || y >= logits.cols)
      throw user_error("label " + std::to_string(y) + " out of range at row " +
                       std::to_string(r));
    const double* row = logits.row(r);
    double max = row[0];
    for (int c = 1; c < logits.cols; ++c) max = std::max(max, row[c]);
    double sum = 0.0;
    for (int c = 0; c < logits.cols; ++c) sum += std::exp(row[c] - max);
    total += std::log(sum) - (row[y] - max);
  }
  return total / logits.rows;
}

void backward(const ModelParams& params, const TrainConfig& cfg, const Matrix& X,
              const BatchPlan& plan, const ForwardCache& cache,
              std::span<const int> labels, ModelParams& grads, int threads) {
  (void)X;  // inputs receive no gradient; kept for signature symmetry
  const int layers = static_cast<int>(params.gat.size());
  const int rows = cache.logits.rows;
  const int C = cache.logits.cols;
  if (labels.size() != static_cast<std::size_t>(rows))
    throw user_error("label count does not match logit rows");

  Matrix dlogits = softmax_rows(cache.logits);
  for (int r = 0; r < rows; ++r) {
    const int y = labels[r];
    if (y < 0 || y >= C)
      throw user_error("label " + std::to_string(y) + " out of range at row " +
                       std::to_string(r));
    double* row = dlogits.row(r);
    row[y] -= 1.0;
    for (int c = 0; c < C; ++c) row[c] /= rows;
  }

  for (int r = 0; r < rows; ++r) axpy(1.0, dlogits.row(r), grads.dense.b.data(), C);
  matmul_at_accum(cache.dense_in, dlogits, grads.dense.W, threads);
  Matrix dH;
  matmul_bt(dlogits, params.dense.W, dH, threads);  // gradient into dense_in rows

  for (int l = layers - 1; l >= 0; --l) {
    const LevelBlock& block = plan.levels[l];
    const LayerCache& lc = cache.layers[l];
    const LayerParams& layer = params.gat[l];
    const int in_count = static_cast<int>(block.in_nodes.size());
    const int out_count = static_cast<int>(block.out_nodes.size());
    const int F_out = layer.out_dim();
    const int F_in = layer.in_dim();
    const int K = static_cast<int>(layer.heads.size());

    // dH currently holds the gradient into H_out of this layer
    Matrix dpre(out_count, F_out);
    parallel_for(out_count, threads, [&](int o) {
      for (int c = 0; c < F_out; ++c)
        dpre(o, c) = dH(o, c) * elu_grad(lc.pre(o, c));
    });

    Matrix dH_in(in_count, F_in);
    Matrix dZ(in_count, F_out);
    Vector dalpha(block.members.size());
    for (int k = 0; k < K; ++k) {
      const HeadCache& hc = lc.heads[k];
      const HeadParams& head = layer.heads[k];
      HeadParams& ghead = grads.gat[l].heads[k];
      const double* a_self = head.a.data();
      const double* a_peer = head.a.data() + F_out;
      double* ga_self = ghead.a.data();
      double* ga_peer = ghead.a.data() + F_out;
      dZ.fill(0.0);

      // slot scatter crosses rows of dZ, so this stays single-threaded
      Vector dg(F_out);
      for (int o = 0; o < out_count; ++o) {
        const int first = block.offsets[o];
        const int last = block.offsets[o + 1];
        const int self_pos = block.members[first];
        for (int c = 0; c < F_out; ++c) dg[c] = dpre(o, c) / K;

        for (int s = first; s < last; ++s) {
          const int p = block.members[s];
          double factor = hc.attn_mask.empty() ? 1.0 : hc.attn_mask[s];
          if (cfg.attention == AttentionMode::eq6) factor *= block.eb[s];
          dalpha[s] = factor * dot(dg.data(), hc.Z.row(p), F_out);
          const double coeff = hc.alpha[s] * factor;
          if (coeff != 0.0) axpy(coeff, dg.data(), dZ.row(p), F_out);
        }
        double inner = 0.0;
        for (int s = first; s < last; ++s) inner += hc.alpha[s] * dalpha[s];
        for (int s = first; s < last; ++s) {
          const double dt = hc.alpha[s] * (dalpha[s] - inner);
          const double draw = dt * (hc.raw[s] > 0.0 ? 1.0 : cfg.leaky_slope);
          if (draw == 0.0) continue;
          const int p = block.members[s];
          axpy(draw, hc.Z.row(self_pos), ga_self, F_out);
          axpy(draw, hc.Z.row(p), ga_peer, F_out);
          axpy(draw, a_self, dZ.row(self_pos), F_out);
          axpy(draw, a_peer, dZ.row(p), F_out);
        }
      }

      matmul_at_accum(lc.H_in, dZ, ghead.W, threads);
      parallel_for(in_count, threads, [&](int r) {
        double* out = dH_in.row(r);
        const double* dz = dZ.row(r);
        for (int j = 0; j < F_in; ++j) out[j] += dot(dz, head.W.row(j), F_out);
      });
    }

    if (!lc.in_mask.empty())
      for (std::size_t i = 0; i < dH_in.data.size(); ++i) dH_in.data[i] *= lc.in_mask[i];
    dH = std::move(dH_in);  // becomes the gradient into the previous H_out
  }
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (int r = 0; r < out.rows; ++r) softmax_span(out.row(r), out.cols);
  return out;
}

std::vector<int> argmax_rows(const Matrix& values) {
  std::vector<int> out(values.rows);
  for (int r = 0; r < values.rows; ++r) {
    const double* row = values.row(r);
    out[r] = static_cast<int>(std::max_element(row, row + values.cols) - row);
  }
  return out;
}

std::vector<Vector> attention_coefficients(const LayerParams& layer, const Matrix& feats,
                                           const BehaviorGraph& graph, int node,
                                           AttentionMode mode, double leaky_slope) {
  if (node < 0 || node >= graph.size()) throw user_error("node index out of range");
  if (feats.cols != layer.in_dim()) throw user_error("feature width mismatch");

  std::vector<int> members{node};
  Vector eb{1.0};
  for (const NeighborEntry& nb : graph.neighbors(node)) {
    members.push_back(nb.node);
    eb.push_back(nb.eb);
  }
  for (int m : members)
    for (int c = 0; c < feats.cols; ++c)
      if (!std::isfinite(feats(m, c)))
        throw user_error("non-finite feature input at node " + std::to_string(m));

  const int F_out = layer.out_dim();
  std::vector<Vector> result;
  for (const HeadParams& head : layer.heads) {
    std::vector<Vector> z(members.size(), Vector(F_out, 0.0));
    for (std::size_t s = 0; s < members.size(); ++s)
      for (int j = 0; j < feats.cols; ++j)
        axpy(feats(members[s], j), head.W.row(j), z[s].data(), F_out);

    const double* a_self = head.a.data();
    const double* a_peer = head.a.data() + F_out;
    const double self_score = dot(a_self, z[0].data(), F_out);
    Vector alpha(members.size());
    for (std::size_t s = 0; s < members.size(); ++s) {
      const double raw = self_score + dot(a_peer, z[s].data(), F_out);
      alpha[s] = leaky_relu(raw, leaky_slope);
      if (mode != AttentionMode::plain) alpha[s] += std::log(eb[s]);
    }
    softmax_span(alpha.data(), static_cast<int>(alpha.size()));
    result.push_back(std::move(alpha));
  }
  return result;
}

Vector aggregate(const std::vector<Vector>& alpha, const LayerParams& layer,
                 const Matrix& feats, const BehaviorGraph& graph, int node,
                 AttentionMode mode) {
  if (node < 0 || node >= graph.size()) throw user_error("node index out of range");
  const auto nbrs = graph.neighbors(node);
  if (alpha.size() != layer.heads.size())
    throw user_error("one coefficient vector per head is required");
  for (const Vector& a : alpha)
    if (a.size() != nbrs.size() + 1)
      throw user_error("coefficient count does not match the neighborhood");

  std::vector<int> members{node};
  Vector eb{1.0};
  for (const NeighborEntry& nb : nbrs) {
    members.push_back(nb.node);
    eb.push_back(nb.eb);
  }

  const int F_out = layer.out_dim();
  Vector sum(F_out, 0.0);
  for (std::size_t k = 0; k < layer.heads.size(); ++k) {
    const HeadParams& head = layer.heads[k];
    for (std::size_t s = 0; s < members.size(); ++s) {
      Vector z(F_out, 0.0);
      for (int j = 0; j < feats.cols; ++j)
        axpy(feats(members[s], j), head.W.row(j), z.data(), F_out);
      double coeff = alpha[k][s];
      if (mode == AttentionMode::eq6) coeff *= eb[s];
      axpy(coeff, z.data(), sum.data(), F_out);
    }
  }
  const double K = static_cast<double>(layer.heads.size());
  for (double& v : sum) v = elu(v / K);
  return sum;
}

Prediction predict(const ModelParams& params, const TrainConfig& cfg,
                   const BehaviorGraph& graph, const Matrix& X, int threads) {
  std::vector<int> all(graph.size());
  for (int i = 0; i < graph.size(); ++i) all[i] = i;
  const BatchPlan plan = make_plan(graph, all, static_cast<int>(params.gat.size()));
  ForwardCache cache = forward(params, cfg, X, plan, /*training=*/false, nullptr, threads);
  Prediction pred;
  pred.probabilities = softmax_rows(cache.logits);
  pred.labels = argmax_rows(pred.probabilities);
  pred.embeddings = std::move(cache.dense_in);
  return pred;
}

}  // namespace bsgat
