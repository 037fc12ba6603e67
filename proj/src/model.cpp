#include "bsgat/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

#include "bsgat/errors.hpp"

namespace bsgat {

std::string to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::eq5: return "eq5";
    case AttentionMode::eq6: return "eq6";
    case AttentionMode::plain: return "plain";
  }
  return "?";
}

AttentionMode attention_mode_from_string(const std::string& name) {
  if (name == "eq5") return AttentionMode::eq5;
  if (name == "eq6") return AttentionMode::eq6;
  if (name == "plain") return AttentionMode::plain;
  throw user_error("unknown attention mode '" + name + "' (expected eq5, eq6 or plain)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw user_error("learning rate must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw user_error("dropout must be in [0, 1)");
  if (hidden <= 0) throw user_error("hidden width must be positive");
  if (layers < 0) throw user_error("layer count must be non-negative");
  if (minibatch <= 0) throw user_error("minibatch size must be positive");
  if (epochs < 0) throw user_error("epoch count must be non-negative");
  if (heads <= 0) throw user_error("head count must be positive");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
    throw user_error("LeakyReLU slope must be in (0, 1)");
}

std::vector<TensorRef> tensor_refs(ModelParams& params) {
  std::vector<TensorRef> refs;
  for (std::size_t l = 0; l < params.gat.size(); ++l) {
    for (std::size_t k = 0; k < params.gat[l].heads.size(); ++k) {
      HeadParams& h = params.gat[l].heads[k];
      const std::string tag = "layer" + std::to_string(l) + ".head" + std::to_string(k);
      refs.push_back({tag + ".W", &h.W.data, h.W.rows, h.W.cols});
      refs.push_back({tag + ".a", &h.a, static_cast<int>(h.a.size()), 1});
    }
  }
  refs.push_back({"dense.W", &params.dense.W.data, params.dense.W.rows, params.dense.W.cols});
  refs.push_back({"dense.b", &params.dense.b, static_cast<int>(params.dense.b.size()), 1});
  return refs;
}

std::vector<TensorView> tensor_views(const ModelParams& params) {
  std::vector<TensorView> views;
  for (TensorRef& r : tensor_refs(const_cast<ModelParams&>(params)))
    views.push_back({r.name, r.data, r.rows, r.cols});
  return views;
}

ModelParams init_params(int input_dim, int num_classes, const TrainConfig& cfg,
                        std::uint64_t seed) {
  cfg.validate();
  if (input_dim <= 0) throw user_error("input dimension must be positive");
  if (num_classes < 2) throw user_error("at least two classes are required");

  ModelParams params;
  int dim = input_dim;
  for (int l = 0; l < cfg.layers; ++l) {
    LayerParams layer;
    for (int k = 0; k < cfg.heads; ++k) {
      HeadParams head;
      head.W = Matrix(dim, cfg.hidden);
      head.a.assign(2 * static_cast<std::size_t>(cfg.hidden), 0.0);
      layer.heads.push_back(std::move(head));
    }
    params.gat.push_back(std::move(layer));
    dim = cfg.hidden;
  }
  params.dense.W = Matrix(dim, num_classes);
  params.dense.b.assign(num_classes, 0.0);

  // one generator, tensors filled in checkpoint order, so a given seed pins
  // every weight no matter how the model is later sliced
  std::mt19937_64 rng(seed);
  for (TensorRef& ref : tensor_refs(params)) {
    if (ref.name == "dense.b") continue;  // biases stay zero
    const double fan_in = ref.cols == 1 ? static_cast<double>(ref.rows) : ref.rows;
    const double fan_out = ref.cols == 1 ? 1.0 : ref.cols;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : *ref.data) w = dist(rng);
  }
  return params;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z = params;
  zero_params(z);
  return z;
}

void zero_params(ModelParams& params) {
  for (TensorRef& ref : tensor_refs(params))
    std::fill(ref.data->begin(), ref.data->end(), 0.0);
}

AdamState AdamState::init(const ModelParams& params) {
  AdamState state;
  for (const TensorView& view : tensor_views(params)) {
    state.m.emplace_back(view.data->size(), 0.0);
    state.v.emplace_back(view.data->size(), 0.0);
  }
  return state;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  std::vector<TensorRef> p = tensor_refs(params);
  std::vector<TensorView> g = tensor_views(grads);
  if (p.size() != g.size() || p.size() != state.m.size())
    throw std::runtime_error("optimizer state does not match the parameter set");

  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<double>& w = *p[i].data;
    const std::vector<double>& dw = *g[i].data;
    if (w.size() != dw.size())
      throw std::runtime_error("gradient shape mismatch on tensor " + p[i].name);
    Vector& m = state.m[i];
    Vector& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (!std::isfinite(dw[j]))
        throw std::runtime_error("non-finite gradient in tensor " + p[i].name);
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * dw[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * dw[j] * dw[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

namespace {

constexpr const char* kMagic = "bsgat-checkpoint";
constexpr int kVersion = 1;

void append_le_doubles(std::string& out, const std::vector<double>& values) {
  for (double value : values) {
    const auto bits = std::bit_cast<std::uint64_t>(value);
    for (int byte = 0; byte < 8; ++byte)
      out.push_back(static_cast<char>((bits >> (8 * byte)) & 0xFF));
  }
}

double read_le_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int byte = 0; byte < 8; ++byte)
    bits |= static_cast<std::uint64_t>(p[byte]) << (8 * byte);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::vector<TensorView> views = tensor_views(ckpt.params);

  nlohmann::json header;
  header["format"] = kMagic;
  header["version"] = kVersion;
  header["train"] = {{"learning_rate", ckpt.train.learning_rate},
                     {"dropout", ckpt.train.dropout},
                     {"hidden", ckpt.train.hidden},
                     {"layers", ckpt.train.layers},
                     {"minibatch", ckpt.train.minibatch},
                     {"epochs", ckpt.train.epochs},
                     {"heads", ckpt.train.heads},
                     {"leaky_slope", ckpt.train.leaky_slope},
                     {"attention", to_string(ckpt.train.attention)},
                     {"seed", ckpt.train.seed}};
  header["graph"] = {{"lambda", ckpt.graph.lambda},
                     {"mu", ckpt.graph.mu},
                     {"prefix_len", ckpt.graph.prefix_len}};
  header["labels"] = {
      {"mode", ckpt.labels.mode == LabelSpace::Mode::binary ? "binary" : "multiclass"},
      {"classes", ckpt.labels.classes}};
  header["normalization"] = {{"min", ckpt.norm.min},
                             {"max", ckpt.norm.max},
                             {"include_port_protocol", ckpt.norm.opts.include_port_protocol},
                             {"fitted_on", ckpt.norm.fitted_on}};
  header["input_dim"] = ckpt.params.input_dim();
  header["num_classes"] = ckpt.params.num_classes();
  nlohmann::json manifest = nlohmann::json::array();
  for (const TensorView& view : views)
    manifest.push_back({{"name", view.name}, {"rows", view.rows}, {"cols", view.cols}});
  header["tensors"] = manifest;

  std::string blob = header.dump();
  blob += '\n';
  for (const TensorView& view : views) append_le_doubles(blob, *view.data);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw user_error("cannot write checkpoint '" + path + "'");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw user_error("short write on checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw user_error("cannot open checkpoint '" + path + "'");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const std::size_t newline = content.find('\n');
  if (newline == std::string::npos)
    throw user_error(path + ": missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(content.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw user_error(path + ": bad header: " + e.what());
  }

  Checkpoint ckpt;
  try {
    if (header.at("format").get<std::string>() != kMagic)
      throw user_error("not a model checkpoint");
    if (header.at("version").get<int>() != kVersion)
      throw user_error("unsupported checkpoint version");
    const nlohmann::json& t = header.at("train");
    ckpt.train.learning_rate = t.at("learning_rate").get<double>();
    ckpt.train.dropout = t.at("dropout").get<double>();
    ckpt.train.hidden = t.at("hidden").get<int>();
    ckpt.train.layers = t.at("layers").get<int>();
    ckpt.train.minibatch = t.at("minibatch").get<int>();
    ckpt.train.epochs = t.at("epochs").get<int>();
    ckpt.train.heads = t.at("heads").get<int>();
    ckpt.train.leaky_slope = t.at("leaky_slope").get<double>();
    ckpt.train.attention = attention_mode_from_string(t.at("attention").get<std::string>());
    ckpt.train.seed = t.at("seed").get<std::uint64_t>();
    const nlohmann::json& g = header.at("graph");
    ckpt.graph.lambda = g.at("lambda").get<double>();
    ckpt.graph.mu = g.at("mu").get<double>();
    ckpt.graph.prefix_len = g.at("prefix_len").get<int>();
    const nlohmann::json& lab = header.at("labels");
    ckpt.labels.mode = lab.at("mode").get<std::string>() == "binary"
                           ? LabelSpace::Mode::binary
                           : LabelSpace::Mode::multiclass;
    ckpt.labels.classes = lab.at("classes").get<std::vector<std::string>>();
    const nlohmann::json& norm = header.at("normalization");
    ckpt.norm.min = norm.at("min").get<std::vector<double>>();
    ckpt.norm.max = norm.at("max").get<std::vector<double>>();
    ckpt.norm.opts.include_port_protocol = norm.at("include_port_protocol").get<bool>();
    ckpt.norm.fitted_on = norm.at("fitted_on").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw user_error(path + ": bad header: " + e.what());
  }
  ckpt.train.validate();
  ckpt.graph.validate();

  const int input_dim = header.at("input_dim").get<int>();
  const int num_classes = header.at("num_classes").get<int>();
  ckpt.params = zeros_like(
      init_params(input_dim, num_classes, ckpt.train, /*seed=*/0));

  std::vector<TensorRef> refs = tensor_refs(ckpt.params);
  const nlohmann::json& manifest = header.at("tensors");
  if (manifest.size() != refs.size())
    throw user_error(path + ": tensor manifest lists " + std::to_string(manifest.size()) +
                     " tensors, model shape needs " + std::to_string(refs.size()));
  std::size_t offset = newline + 1;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const nlohmann::json& entry = manifest[i];
    if (entry.at("name").get<std::string>() != refs[i].name ||
        entry.at("rows").get<int>() != refs[i].rows ||
        entry.at("cols").get<int>() != refs[i].cols)
      throw user_error(path + ": tensor " + std::to_string(i) + " expected " + refs[i].name +
                       " [" + std::to_string(refs[i].rows) + "x" +
                       std::to_string(refs[i].cols) + "]");
    std::vector<double>& data = *refs[i].data;
    const std::size_t bytes = data.size() * 8;
    if (offset + bytes > content.size())
      throw user_error(path + ": truncated at byte " + std::to_string(content.size()) +
                       " while reading tensor " + refs[i].name);
    const auto* p = reinterpret_cast<const unsigned char*>(content.data() + offset);
    for (std::size_t j = 0; j < data.size(); ++j) {
      data[j] = read_le_double(p + j * 8);
      if (!std::isfinite(data[j]))
        throw user_error(path + ": non-finite value in tensor " + refs[i].name);
    }
    offset += bytes;
  }
  if (offset != content.size())
    throw user_error(path + ": " + std::to_string(content.size() - offset) +
                     " trailing bytes after the last tensor");
  return ckpt;
}

}  // namespace bsgat
