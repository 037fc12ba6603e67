#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bsgat/flow.hpp"

namespace bsgat {

// Edge classes, in priority order: same source endpoint beats same-area
// service reuse beats cross-area service reuse.  Each node pair carries at
// most one class.
enum class EdgeClass { S = 0, M = 1, O = 2 };

char to_char(EdgeClass cls);
EdgeClass edge_class_from_char(char c);

struct GraphConfig {
  double lambda = 0.85;  // weight of M edges
  double mu = 0.7;       // weight of O edges
  int prefix_len = 24;   // subnet mask length applied to src_ip

  void validate() const;  // requires 0 < mu < lambda <= 1
  double weight(EdgeClass cls) const;
  bool operator==(const GraphConfig&) const = default;
};

struct Edge {
  int i = 0;
  int j = 0;
  EdgeClass cls = EdgeClass::S;
  auto operator<=>(const Edge&) const = default;
};

struct NeighborEntry {
  int node = 0;
  double eb = 0.0;
  EdgeClass cls = EdgeClass::S;
  bool operator==(const NeighborEntry&) const = default;
};

// Undirected behavior-similarity graph over flow records.  Edges are stored
// once with i < j; adjacency lists are symmetric and sorted by neighbor.
// Self-edges are never stored (the model adds the implicit self-connection).
class BehaviorGraph {
 public:
  BehaviorGraph() = default;
  BehaviorGraph(int n, const GraphConfig& config, std::vector<Edge> edges);

  int size() const { return n_; }
  const GraphConfig& config() const { return config_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const NeighborEntry> neighbors(int i) const;
  std::vector<int> degrees() const;
  std::array<std::size_t, 3> edge_count_by_class() const;
  bool operator==(const BehaviorGraph&) const = default;

 private:
  int n_ = 0;
  GraphConfig config_;
  std::vector<Edge> edges_;        // canonical: i < j, sorted
  std::vector<int> offsets_;       // CSR offsets, size n_ + 1
  std::vector<NeighborEntry> entries_;
};

// Number of leading bits shared by two addresses (32 when equal).
inline int common_prefix_length(IPv4 a, IPv4 b) {
  return a == b ? 32 : std::countl_zero(a ^ b);
}

// Nodes grouped by masked src_ip; bases ascending, members ascending.
struct MaskAreaPartition {
  std::vector<IPv4> bases;
  std::vector<std::vector<int>> members;
  std::vector<int> area_of;  // node index -> area index
};

MaskAreaPartition mask_area_partition(std::span<const FlowRecord> flows, int prefix_len);

// Index of the base sharing the longest prefix with ip, skipping `exclude`;
// ties resolve to the numerically smallest base.  -1 when no candidate.
int longest_prefix_area(IPv4 ip, std::span<const IPv4> bases, int exclude);

// Hashed-bucket construction.  Deterministic for a given input regardless of
// the thread count.
BehaviorGraph build_graph(std::span<const FlowRecord> flows, const GraphConfig& config,
                          int threads = 1);

// Pairwise reference construction; quadratic, kept free of shared code with
// build_graph so the two can cross-check each other.
BehaviorGraph build_graph_bruteforce(std::span<const FlowRecord> flows,
                                     const GraphConfig& config);

void serialize_graph(std::ostream& out, const BehaviorGraph& graph);
void save_graph(const std::string& path, const BehaviorGraph& graph);
BehaviorGraph parse_graph(std::istream& in);
BehaviorGraph load_graph(const std::string& path);

}  // namespace bsgat
