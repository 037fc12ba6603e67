#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsgat/flow.hpp"

namespace bsgat {

enum class ColumnRole {
  src_ip,
  src_port,
  dst_ip,
  dst_port,
  protocol,
  feature,
  label,
  attack_class,
  ignored,
};

ColumnRole column_role_from_string(const std::string& name);
std::string to_string(ColumnRole role);

// Column-name -> role mapping. Columns not listed take their default NF-v2
// role (IPV4_SRC_ADDR and friends) or fall back to `feature`.
struct DatasetSchema {
  std::map<std::string, ColumnRole> column_roles;

  ColumnRole role_of(const std::string& column) const;
  static DatasetSchema nfv2();
};

struct Dataset {
  std::vector<FlowRecord> flows;
  std::vector<std::string> feature_names;  // order matches FlowRecord::features

  bool operator==(const Dataset&) const = default;
};

// CSV, UTF-8, header row, comma delimiter. Row order is preserved; malformed
// rows are reported with their line number.
Dataset parse_flow_csv(std::istream& in, const DatasetSchema& schema = DatasetSchema::nfv2());
Dataset load_flow_csv(const std::string& path, const DatasetSchema& schema = DatasetSchema::nfv2());

// Inverse of parse_flow_csv: emits the same schema the parser accepts.
void write_flow_csv(std::ostream& out, const Dataset& dataset);
void save_flow_csv(const std::string& path, const Dataset& dataset);

struct SamplingPolicy {
  std::vector<std::string> full_retention;  // classes kept at 100%
  double fraction = 1.0;                    // (0, 1] for the remaining classes
  std::uint64_t seed = 0;
};

// Full-retention classes are kept whole; every other class is subsampled
// without replacement at floor(count * fraction + 0.5). Input order is kept.
std::vector<FlowRecord> sample_by_class(std::span<const FlowRecord> flows,
                                        const SamplingPolicy& policy,
                                        std::vector<std::string>* warnings = nullptr);

struct SplitSpec {
  double train = 0.5;
  double val = 0.2;
  double test = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

// Stratified by attack_class; disjoint; union = input. Classes with fewer
// than 3 members go entirely to train (with a warning).
SplitIndices split_indices(std::span<const FlowRecord> flows, const SplitSpec& spec,
                           std::vector<std::string>* warnings = nullptr);

struct DatasetSplits {
  std::vector<FlowRecord> train;
  std::vector<FlowRecord> val;
  std::vector<FlowRecord> test;
};

DatasetSplits split_dataset(std::span<const FlowRecord> flows, const SplitSpec& spec,
                            std::vector<std::string>* warnings = nullptr);

struct SynthClassSpec {
  std::string name;
  bool attack = true;
  int flows = 0;
  int src_hosts = 1;        // hosts drawn from this class's slice of the pool
  int dst_count = 1;        // distinct (dst_ip, dst_port) destinations
  int src_ports = 0;        // 0 = ephemeral; otherwise a fixed pool of this size
  double feature_scale = 1.0;
};

struct SynthSpec {
  int hosts = 40;
  int subnets = 4;
  int prefix_len = 24;
  int feature_dim = 8;
  double class_separation = 1.75;
  std::vector<SynthClassSpec> classes;
  std::uint64_t seed = 0;

  void validate() const;
};

// Deterministic per seed. Classes get class-conditional feature distributions
// and addressing behavior, so they are separable and graph-connected.
Dataset generate_synthetic(const SynthSpec& spec);

}  // namespace bsgat
