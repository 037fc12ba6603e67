#include "bsgat/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "bsgat/errors.hpp"
#include "bsgat/la.hpp"

namespace bsgat {

char to_char(EdgeClass cls) {
  switch (cls) {
    case EdgeClass::S: return 'S';
    case EdgeClass::M: return 'M';
    case EdgeClass::O: return 'O';
  }
  return '?';
}

EdgeClass edge_class_from_char(char c) {
  switch (c) {
    case 'S': return EdgeClass::S;
    case 'M': return EdgeClass::M;
    case 'O': return EdgeClass::O;
    default: throw user_error(std::string("unknown edge class '") + c + "'");
  }
}

void GraphConfig::validate() const {
  if (!(mu > 0.0 && mu < lambda && lambda <= 1.0))
    throw user_error("edge weights must satisfy 0 < mu < lambda <= 1");
  if (prefix_len < 1 || prefix_len > 31)
    throw user_error("prefix length must be in [1, 31]");
}

double GraphConfig::weight(EdgeClass cls) const {
  switch (cls) {
    case EdgeClass::S: return 1.0;
    case EdgeClass::M: return lambda;
    case EdgeClass::O: return mu;
  }
  return 0.0;
}

BehaviorGraph::BehaviorGraph(int n, const GraphConfig& config, std::vector<Edge> edges)
    : n_(n), config_(config), edges_(std::move(edges)) {
  config_.validate();
  if (n_ < 0) throw user_error("negative node count");
  for (Edge& e : edges_) {
    if (e.i < 0 || e.i >= n_ || e.j < 0 || e.j >= n_)
      throw user_error("edge endpoint out of range");
    if (e.i == e.j) throw user_error("self-edge not allowed");
    if (e.i > e.j) std::swap(e.i, e.j);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (std::size_t k = 1; k < edges_.size(); ++k)
    if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j)
      throw user_error("node pair (" + std::to_string(edges_[k].i) + ", " +
                       std::to_string(edges_[k].j) + ") carries two edge classes");

  offsets_.assign(n_ + 1, 0);
  for (const Edge& e : edges_) {
    ++offsets_[e.i + 1];
    ++offsets_[e.j + 1];
  }
  for (int i = 0; i < n_; ++i) offsets_[i + 1] += offsets_[i];
  entries_.resize(edges_.size() * 2);
  std::vector<int> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const Edge& e : edges_) {
    const double eb = config_.weight(e.cls);
    entries_[cursor[e.i]++] = NeighborEntry{e.j, eb, e.cls};
    entries_[cursor[e.j]++] = NeighborEntry{e.i, eb, e.cls};
  }
  // edges_ is sorted by (i, j), so each list comes out ascending except for
  // the entries scattered from the j side; one sort per list restores order
  for (int i = 0; i < n_; ++i)
    std::sort(entries_.begin() + offsets_[i], entries_.begin() + offsets_[i + 1],
              [](const NeighborEntry& a, const NeighborEntry& b) { return a.node < b.node; });
}

std::span<const NeighborEntry> BehaviorGraph::neighbors(int i) const {
  if (i < 0 || i >= n_) throw user_error("node index out of range");
  return {entries_.data() + offsets_[i],
          static_cast<std::size_t>(offsets_[i + 1] - offsets_[i])};
}

std::vector<int> BehaviorGraph::degrees() const {
  std::vector<int> out(n_);
  for (int i = 0; i < n_; ++i) out[i] = offsets_[i + 1] - offsets_[i];
  return out;
}

std::array<std::size_t, 3> BehaviorGraph::edge_count_by_class() const {
  std::array<std::size_t, 3> counts{0, 0, 0};
  for (const Edge& e : edges_) ++counts[static_cast<int>(e.cls)];
  return counts;
}

MaskAreaPartition mask_area_partition(std::span<const FlowRecord> flows, int prefix_len) {
  if (prefix_len < 1 || prefix_len > 31)
    throw user_error("prefix length must be in [1, 31]");
  const int shift = 32 - prefix_len;
  std::map<IPv4, std::vector<int>> groups;
  for (std::size_t i = 0; i < flows.size(); ++i)
    groups[(flows[i].src_ip >> shift) << shift].push_back(static_cast<int>(i));

  MaskAreaPartition out;
  out.area_of.resize(flows.size());
  for (auto& [base, members] : groups) {
    for (int m : members) out.area_of[m] = static_cast<int>(out.bases.size());
    out.bases.push_back(base);
    out.members.push_back(std::move(members));
  }
  return out;
}

int longest_prefix_area(IPv4 ip, std::span<const IPv4> bases, int exclude) {
  int best = -1;
  int best_len = -1;
  for (int a = 0; a < static_cast<int>(bases.size()); ++a) {
    if (a == exclude) continue;
    const int len = common_prefix_length(ip, bases[a]);
    if (len > best_len || (len == best_len && best >= 0 && bases[a] < bases[best])) {
      best = a;
      best_len = len;
    }
  }
  return best;
}

namespace {

struct Key4 {
  std::uint32_t a = 0, b = 0, c = 0, d = 0;
  bool operator==(const Key4&) const = default;
};

struct Key4Hash {
  std::size_t operator()(const Key4& k) const {
    return static_cast<std::size_t>(
        mix_seed(mix_seed(k.a, k.b), mix_seed(k.c, k.d)));
  }
};

// Binary trie over area bases truncated to prefix_len bits.  All keys have
// the same depth, so leaves sit only at the bottom level.
class PrefixTrie {
 public:
  explicit PrefixTrie(int depth) : depth_(depth) {
    children_.push_back({-1, -1});
    leaf_area_.push_back(-1);
  }

  void insert(IPv4 base, int area) {
    int node = 0;
    for (int d = 0; d < depth_; ++d) {
      const int bit = (base >> (31 - d)) & 1;
      if (children_[node][bit] < 0) {
        children_[node][bit] = static_cast<int>(children_.size());
        children_.push_back({-1, -1});
        leaf_area_.push_back(-1);
      }
      node = children_[node][bit];
    }
    leaf_area_[node] = area;
  }

  // Area diverging from ip at the greatest depth, excluding the leaf on
  // ip's own path; ties share one subtree, where the 0-first descent finds
  // the numerically smallest base.
  int lookup_other(IPv4 ip) const {
    int node = 0;
    int best_sibling = -1;
    for (int d = 0; d < depth_ && node >= 0; ++d) {
      const int bit = (ip >> (31 - d)) & 1;
      if (children_[node][1 - bit] >= 0) best_sibling = children_[node][1 - bit];
      node = children_[node][bit];
    }
    if (best_sibling < 0) return -1;
    int cur = best_sibling;
    while (leaf_area_[cur] < 0)
      cur = children_[cur][0] >= 0 ? children_[cur][0] : children_[cur][1];
    return leaf_area_[cur];
  }

 private:
  int depth_;
  std::vector<std::array<int, 2>> children_;
  std::vector<int> leaf_area_;
};

}  // namespace

BehaviorGraph build_graph(std::span<const FlowRecord> flows, const GraphConfig& config,
                          int threads) {
  config.validate();
  const int n = static_cast<int>(flows.size());
  const MaskAreaPartition areas = mask_area_partition(flows, config.prefix_len);

  PrefixTrie trie(config.prefix_len);
  for (int a = 0; a < static_cast<int>(areas.bases.size()); ++a)
    trie.insert(areas.bases[a], a);

  // lpa[i]: the nearest foreign area by shared prefix; own area never wins
  // because every other area diverges from i's path strictly above the leaf
  std::vector<int> lpa(n, -1);
  parallel_for(n, threads,
               [&](int i) { lpa[i] = trie.lookup_other(flows[i].src_ip); });

  std::unordered_map<std::uint32_t, std::vector<int>> by_src;
  std::unordered_map<Key4, std::vector<int>, Key4Hash> by_service;    // area, dst
  std::unordered_map<Key4, std::vector<int>, Key4Hash> by_endpoints;  // area, ports, dst
  for (int i = 0; i < n; ++i) {
    const FlowRecord& f = flows[i];
    const auto area = static_cast<std::uint32_t>(areas.area_of[i]);
    by_src[f.src_ip].push_back(i);
    by_service[Key4{area, f.dst_ip, f.dst_port, 0}].push_back(i);
    by_endpoints[Key4{area, f.src_port, f.dst_ip, f.dst_port}].push_back(i);
  }

  std::vector<Edge> edges;
  for (const auto& [ip, members] : by_src)
    for (std::size_t a = 0; a + 1 < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b)
        edges.push_back(Edge{members[a], members[b], EdgeClass::S});

  for (const auto& [key, members] : by_service)
    for (std::size_t a = 0; a + 1 < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b)
        if (flows[members[a]].src_ip != flows[members[b]].src_ip)
          edges.push_back(Edge{members[a], members[b], EdgeClass::M});

  // an O candidate pair spans two areas, so it can never duplicate an S or
  // M pair (those share the masked prefix); only the i/j mirror repeats
  for (int i = 0; i < n; ++i) {
    if (lpa[i] < 0) continue;
    const FlowRecord& f = flows[i];
    const Key4 key{static_cast<std::uint32_t>(lpa[i]), f.src_port, f.dst_ip, f.dst_port};
    if (auto it = by_endpoints.find(key); it != by_endpoints.end())
      for (int j : it->second)
        edges.push_back(Edge{std::min(i, j), std::max(i, j), EdgeClass::O});
  }

  return BehaviorGraph(n, config, std::move(edges));
}

BehaviorGraph build_graph_bruteforce(std::span<const FlowRecord> flows,
                                     const GraphConfig& config) {
  config.validate();
  const int n = static_cast<int>(flows.size());
  const int shift = 32 - config.prefix_len;
  const MaskAreaPartition areas = mask_area_partition(flows, config.prefix_len);

  std::vector<int> lpa(n, -1);
  for (int i = 0; i < n; ++i)
    lpa[i] = longest_prefix_area(flows[i].src_ip, areas.bases, areas.area_of[i]);

  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const FlowRecord& fi = flows[i];
      const FlowRecord& fj = flows[j];
      if (fi.src_ip == fj.src_ip) {
        edges.push_back(Edge{i, j, EdgeClass::S});
        continue;
      }
      if ((fi.src_ip >> shift) == (fj.src_ip >> shift) && fi.dst_ip == fj.dst_ip &&
          fi.dst_port == fj.dst_port) {
        edges.push_back(Edge{i, j, EdgeClass::M});
        continue;
      }
      const bool in_lpa = areas.area_of[j] == lpa[i] || areas.area_of[i] == lpa[j];
      if (in_lpa && fi.src_port == fj.src_port && fi.dst_ip == fj.dst_ip &&
          fi.dst_port == fj.dst_port)
        edges.push_back(Edge{i, j, EdgeClass::O});
    }
  }
  return BehaviorGraph(n, config, std::move(edges));
}

void serialize_graph(std::ostream& out, const BehaviorGraph& graph) {
  const GraphConfig& cfg = graph.config();
  out << "nodes=" << graph.size() << " lambda=" << format_double(cfg.lambda)
      << " mu=" << format_double(cfg.mu) << " prefix=" << cfg.prefix_len << '\n';
  for (const Edge& e : graph.edges())
    out << e.i << ' ' << e.j << ' ' << to_char(e.cls) << ' '
        << format_double(cfg.weight(e.cls)) << '\n';
}

void save_graph(const std::string& path, const BehaviorGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw user_error("cannot write graph file '" + path + "'");
  serialize_graph(out, graph);
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

template <typename T>
T parse_value(const std::string& token, const std::string& key, int line_no) {
  const std::string prefix = key + "=";
  if (!token.starts_with(prefix))
    throw user_error("line " + std::to_string(line_no) + ": expected " + key +
                     "=<value>, got '" + token + "'");
  T value{};
  const char* first = token.data() + prefix.size();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw user_error("line " + std::to_string(line_no) + ": unparseable " + key +
                     " in '" + token + "'");
  return value;
}

}  // namespace

BehaviorGraph parse_graph(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw user_error("empty graph file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> head = split_ws(line);
  if (head.size() != 4)
    throw user_error("line 1: expected 'nodes=<n> lambda=<l> mu=<m> prefix=<p>'");
  const int n = parse_value<int>(head[0], "nodes", 1);
  GraphConfig config;
  config.lambda = parse_value<double>(head[1], "lambda", 1);
  config.mu = parse_value<double>(head[2], "mu", 1);
  config.prefix_len = parse_value<int>(head[3], "prefix", 1);
  config.validate();
  if (n < 0) throw user_error("line 1: negative node count");

  std::vector<Edge> edges;
  std::map<std::pair<int, int>, int> seen;  // pair -> first line
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> tok = split_ws(line);
    if (tok.size() != 4)
      throw user_error("line " + std::to_string(line_no) +
                       ": expected '<i> <j> <class> <eb>'");
    Edge e;
    auto parse_node = [&](const std::string& t) {
      int v = 0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc{} || ptr != t.data() + t.size() || v < 0 || v >= n)
        throw user_error("line " + std::to_string(line_no) + ": node index '" + t +
                         "' out of range [0, " + std::to_string(n) + ")");
      return v;
    };
    e.i = parse_node(tok[0]);
    e.j = parse_node(tok[1]);
    if (e.i == e.j)
      throw user_error("line " + std::to_string(line_no) + ": self-edge on node " +
                       std::to_string(e.i));
    if (tok[2].size() != 1)
      throw user_error("line " + std::to_string(line_no) + ": bad edge class '" +
                       tok[2] + "'");
    try {
      e.cls = edge_class_from_char(tok[2][0]);
    } catch (const user_error& err) {
      throw user_error("line " + std::to_string(line_no) + ": " + err.what());
    }
    double eb = 0.0;
    auto [ptr, ec] = std::from_chars(tok[3].data(), tok[3].data() + tok[3].size(), eb);
    if (ec != std::errc{} || ptr != tok[3].data() + tok[3].size())
      throw user_error("line " + std::to_string(line_no) + ": unparseable weight '" +
                       tok[3] + "'");
    if (eb != config.weight(e.cls))
      throw user_error("line " + std::to_string(line_no) + ": weight " +
                       format_double(eb) + " does not match class " + to_char(e.cls) +
                       " weight " + format_double(config.weight(e.cls)));
    const std::pair<int, int> key{std::min(e.i, e.j), std::max(e.i, e.j)};
    if (auto [it, inserted] = seen.emplace(key, line_no); !inserted)
      throw user_error("line " + std::to_string(line_no) + ": duplicate of edge on line " +
                       std::to_string(it->second));
    edges.push_back(e);
  }
  return BehaviorGraph(n, config, std::move(edges));
}

BehaviorGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw user_error("cannot open graph file '" + path + "'");
  try {
    return parse_graph(in);
  } catch (const user_error& e) {
    throw user_error(path + ": " + e.what());
  }
}

}  // namespace bsgat
