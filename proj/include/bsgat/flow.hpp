#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bsgat/la.hpp"

namespace bsgat {

using IPv4 = std::uint32_t;

IPv4 parse_ipv4(std::string_view text);
std::string format_ipv4(IPv4 addr);

inline constexpr const char* kBenignClass = "Benign";

// One NetFlow entry. Addressing drives graph construction; the numeric
// feature columns (plus, optionally, ports and protocol) feed the network.
struct FlowRecord {
  IPv4 src_ip = 0;
  std::uint16_t src_port = 0;
  IPv4 dst_ip = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;
  std::vector<double> features;  // raw feature columns, dataset order
  int label = 0;                 // 0 = benign, 1 = attack
  std::string attack_class;      // "Benign" iff label == 0

  bool operator==(const FlowRecord&) const = default;
};

struct LabelSpace {
  enum class Mode { binary, multiclass };

  Mode mode = Mode::binary;
  std::vector<std::string> classes;  // position = class index

  int size() const { return static_cast<int>(classes.size()); }
  int index_of(const FlowRecord& flow) const;
  int index_of_name(const std::string& name) const;  // -1 when absent

  static LabelSpace binary();
  // Multiclass: "Benign" first when present, remaining names sorted.
  static LabelSpace from_flows(std::span<const FlowRecord> flows, Mode mode);
};

struct FeatureOptions {
  // When set, src_port, dst_port and protocol are appended to the feature
  // columns as three extra normalized inputs.
  bool include_port_protocol = true;
};

struct NormalizationStats {
  std::vector<double> min;
  std::vector<double> max;
  FeatureOptions opts;
  std::string fitted_on = "train";

  int dim() const { return static_cast<int>(min.size()); }
};

int feature_dim(std::span<const FlowRecord> flows, const FeatureOptions& opts);

// Per-feature min/max over the given flows only. Fit this on the training
// split; validation/test values outside the range are clamped later.
NormalizationStats fit_normalizer(std::span<const FlowRecord> train_flows,
                                  const FeatureOptions& opts = {},
                                  std::string fitted_on = "train");

// (x - min) / (max - min) clamped to [0, 1]; constant columns map to 0.
Matrix normalize(std::span<const FlowRecord> flows, const NormalizationStats& stats);

}  // namespace bsgat
