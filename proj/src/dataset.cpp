#include "bsgat/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "bsgat/errors.hpp"

namespace bsgat {

ColumnRole column_role_from_string(const std::string& name) {
  if (name == "src_ip") return ColumnRole::src_ip;
  if (name == "src_port") return ColumnRole::src_port;
  if (name == "dst_ip") return ColumnRole::dst_ip;
  if (name == "dst_port") return ColumnRole::dst_port;
  if (name == "protocol") return ColumnRole::protocol;
  if (name == "feature") return ColumnRole::feature;
  if (name == "label") return ColumnRole::label;
  if (name == "attack_class") return ColumnRole::attack_class;
  if (name == "ignored") return ColumnRole::ignored;
  throw user_error("unknown column role '" + name + "'");
}

std::string to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::src_ip: return "src_ip";
    case ColumnRole::src_port: return "src_port";
    case ColumnRole::dst_ip: return "dst_ip";
    case ColumnRole::dst_port: return "dst_port";
    case ColumnRole::protocol: return "protocol";
    case ColumnRole::feature: return "feature";
    case ColumnRole::label: return "label";
    case ColumnRole::attack_class: return "attack_class";
    case ColumnRole::ignored: return "ignored";
  }
  return "?";
}

ColumnRole DatasetSchema::role_of(const std::string& column) const {
  if (auto it = column_roles.find(column); it != column_roles.end()) return it->second;
  if (column == "IPV4_SRC_ADDR") return ColumnRole::src_ip;
  if (column == "L4_SRC_PORT") return ColumnRole::src_port;
  if (column == "IPV4_DST_ADDR") return ColumnRole::dst_ip;
  if (column == "L4_DST_PORT") return ColumnRole::dst_port;
  if (column == "PROTOCOL") return ColumnRole::protocol;
  if (column == "Label") return ColumnRole::label;
  if (column == "Attack") return ColumnRole::attack_class;
  return ColumnRole::feature;
}

DatasetSchema DatasetSchema::nfv2() { return DatasetSchema{}; }

namespace {

// Minimal CSV dialect: comma delimiter, optional double quotes, CRLF tolerated.
std::vector<std::string> split_csv_line(const std::string& line, int line_no) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"' && cell.empty()) {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  if (quoted) throw user_error("line " + std::to_string(line_no) + ": unterminated quote");
  cells.push_back(std::move(cell));
  if (!cells.empty() && !cells.back().empty() && cells.back().back() == '\r')
    cells.back().pop_back();
  return cells;
}

std::string cell_context(int line_no, const std::string& column) {
  return "row " + std::to_string(line_no) + " column '" + column + "'";
}

long long parse_int_cell(const std::string& cell, int line_no, const std::string& column,
                         long long lo, long long hi) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size())
    throw user_error(cell_context(line_no, column) + ": unparseable integer '" + cell + "'");
  if (value < lo || value > hi)
    throw user_error(cell_context(line_no, column) + ": value " + std::to_string(value) +
                     " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return value;
}

double parse_double_cell(const std::string& cell, int line_no, const std::string& column) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value))
    throw user_error(cell_context(line_no, column) + ": unparseable numeric '" + cell + "'");
  return value;
}

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\n") != std::string::npos;
}

std::string quote_csv(const std::string& s) {
  if (!needs_quoting(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

Dataset parse_flow_csv(std::istream& in, const DatasetSchema& schema) {
  std::string header;
  if (!std::getline(in, header)) throw user_error("empty file");
  const std::vector<std::string> columns = split_csv_line(header, 1);

  std::vector<ColumnRole> roles(columns.size());
  std::map<ColumnRole, int> unique_cols;  // one column per non-feature role
  Dataset dataset;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    roles[i] = schema.role_of(columns[i]);
    if (roles[i] == ColumnRole::feature) {
      dataset.feature_names.push_back(columns[i]);
    } else if (roles[i] != ColumnRole::ignored) {
      if (auto [it, inserted] = unique_cols.emplace(roles[i], static_cast<int>(i)); !inserted)
        throw user_error("columns '" + columns[it->second] + "' and '" + columns[i] +
                         "' both map to role " + to_string(roles[i]));
    }
  }
  for (ColumnRole required : {ColumnRole::src_ip, ColumnRole::src_port, ColumnRole::dst_ip,
                              ColumnRole::dst_port, ColumnRole::protocol, ColumnRole::label,
                              ColumnRole::attack_class}) {
    if (!unique_cols.contains(required))
      throw user_error("missing mapped column for role " + to_string(required));
  }

  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line, line_no);
    if (cells.size() != columns.size())
      throw user_error("row " + std::to_string(line_no) + ": expected " +
                       std::to_string(columns.size()) + " cells, got " +
                       std::to_string(cells.size()));
    FlowRecord flow;
    flow.features.reserve(dataset.feature_names.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string& column = columns[i];
      const std::string& cell = cells[i];
      switch (roles[i]) {
        case ColumnRole::src_ip:
          try {
            flow.src_ip = parse_ipv4(cell);
          } catch (const user_error&) {
            throw user_error(cell_context(line_no, column) + ": invalid IPv4 '" + cell + "'");
          }
          break;
        case ColumnRole::dst_ip:
          try {
            flow.dst_ip = parse_ipv4(cell);
          } catch (const user_error&) {
            throw user_error(cell_context(line_no, column) + ": invalid IPv4 '" + cell + "'");
          }
          break;
        case ColumnRole::src_port:
          flow.src_port = static_cast<std::uint16_t>(parse_int_cell(cell, line_no, column, 0, 65535));
          break;
        case ColumnRole::dst_port:
          flow.dst_port = static_cast<std::uint16_t>(parse_int_cell(cell, line_no, column, 0, 65535));
          break;
        case ColumnRole::protocol:
          flow.protocol = static_cast<std::uint8_t>(parse_int_cell(cell, line_no, column, 0, 255));
          break;
        case ColumnRole::label:
          flow.label = static_cast<int>(parse_int_cell(cell, line_no, column, 0, 1));
          break;
        case ColumnRole::attack_class:
          flow.attack_class = cell;
          break;
        case ColumnRole::feature:
          flow.features.push_back(parse_double_cell(cell, line_no, column));
          break;
        case ColumnRole::ignored:
          break;
      }
    }
    const bool benign_name = flow.attack_class == kBenignClass;
    if (benign_name != (flow.label == 0))
      throw user_error("row " + std::to_string(line_no) + ": label " +
                       std::to_string(flow.label) + " inconsistent with class '" +
                       flow.attack_class + "'");
    dataset.flows.push_back(std::move(flow));
  }
  if (dataset.flows.empty()) throw user_error("no data rows");
  return dataset;
}

Dataset load_flow_csv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw user_error("cannot open dataset file '" + path + "'");
  try {
    return parse_flow_csv(in, schema);
  } catch (const user_error& e) {
    throw user_error(path + ": " + e.what());
  }
}

void write_flow_csv(std::ostream& out, const Dataset& dataset) {
  out << "IPV4_SRC_ADDR,L4_SRC_PORT,IPV4_DST_ADDR,L4_DST_PORT,PROTOCOL";
  for (const auto& name : dataset.feature_names) out << ',' << quote_csv(name);
  out << ",Label,Attack\n";
  for (const auto& flow : dataset.flows) {
    if (flow.features.size() != dataset.feature_names.size())
      throw user_error("flow feature count does not match feature_names");
    out << format_ipv4(flow.src_ip) << ',' << flow.src_port << ','
        << format_ipv4(flow.dst_ip) << ',' << flow.dst_port << ','
        << static_cast<int>(flow.protocol);
    for (double v : flow.features) out << ',' << format_double(v);
    out << ',' << flow.label << ',' << quote_csv(flow.attack_class) << '\n';
  }
}

void save_flow_csv(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw user_error("cannot write dataset file '" + path + "'");
  write_flow_csv(out, dataset);
}

std::vector<FlowRecord> sample_by_class(std::span<const FlowRecord> flows,
                                        const SamplingPolicy& policy,
                                        std::vector<std::string>* warnings) {
  if (policy.fraction <= 0.0 || policy.fraction > 1.0)
    throw user_error("sampling fraction must be in (0, 1]");

  std::map<std::string, std::vector<int>> by_class;  // ordered for determinism
  for (std::size_t i = 0; i < flows.size(); ++i)
    by_class[flows[i].attack_class].push_back(static_cast<int>(i));

  for (const auto& name : policy.full_retention) {
    if (!by_class.contains(name) && warnings)
      warnings->push_back("full-retention class '" + name + "' not present in data");
  }

  std::vector<char> keep(flows.size(), 0);
  std::mt19937_64 rng(policy.seed);
  for (auto& [name, indices] : by_class) {
    const bool full = policy.fraction >= 1.0 ||
                      std::find(policy.full_retention.begin(), policy.full_retention.end(),
                                name) != policy.full_retention.end();
    if (full) {
      for (int idx : indices) keep[idx] = 1;
      continue;
    }
    const auto count = static_cast<std::size_t>(
        std::floor(static_cast<double>(indices.size()) * policy.fraction + 0.5));
    // partial Fisher-Yates: the first `count` slots end up as the sample
    for (std::size_t j = 0; j < count && j < indices.size(); ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, indices.size() - 1);
      std::swap(indices[j], indices[pick(rng)]);
      keep[indices[j]] = 1;
    }
  }

  std::vector<FlowRecord> out;
  for (std::size_t i = 0; i < flows.size(); ++i)
    if (keep[i]) out.push_back(flows[i]);
  return out;
}

void SplitSpec::validate() const {
  if (train < 0 || val < 0 || test < 0)
    throw user_error("split ratios must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9)
    throw user_error("split ratios must sum to 1");
}

SplitIndices split_indices(std::span<const FlowRecord> flows, const SplitSpec& spec,
                           std::vector<std::string>* warnings) {
  spec.validate();
  std::map<std::string, std::vector<int>> by_class;
  for (std::size_t i = 0; i < flows.size(); ++i)
    by_class[flows[i].attack_class].push_back(static_cast<int>(i));

  SplitIndices out;
  std::mt19937_64 rng(spec.seed);
  for (auto& [name, indices] : by_class) {
    const auto n = indices.size();
    if (n < 3) {
      out.train.insert(out.train.end(), indices.begin(), indices.end());
      if (warnings)
        warnings->push_back("class '" + name + "' has only " + std::to_string(n) +
                            " member(s); placed entirely in the training split");
      continue;
    }
    std::shuffle(indices.begin(), indices.end(), rng);
    const double ratios[3] = {spec.train, spec.val, spec.test};
    std::size_t counts[3];
    double fracs[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = static_cast<double>(n) * ratios[s];
      counts[s] = static_cast<std::size_t>(std::floor(exact));
      fracs[s] = exact - std::floor(exact);
      assigned += counts[s];
    }
    // largest remainder; ties resolved in train, val, test order
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3, [&](int a, int b) { return fracs[a] > fracs[b]; });
    for (std::size_t r = 0; r < n - assigned; ++r) ++counts[order[r % 3]];

    std::size_t pos = 0;
    std::vector<int>* splits[3] = {&out.train, &out.val, &out.test};
    for (int s = 0; s < 3; ++s)
      for (std::size_t j = 0; j < counts[s]; ++j) splits[s]->push_back(indices[pos++]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

DatasetSplits split_dataset(std::span<const FlowRecord> flows, const SplitSpec& spec,
                            std::vector<std::string>* warnings) {
  const SplitIndices idx = split_indices(flows, spec, warnings);
  DatasetSplits out;
  for (int i : idx.train) out.train.push_back(flows[i]);
  for (int i : idx.val) out.val.push_back(flows[i]);
  for (int i : idx.test) out.test.push_back(flows[i]);
  return out;
}

void SynthSpec::validate() const {
  if (hosts <= 0) throw user_error("synth: host count must be positive");
  if (subnets <= 0 || subnets > hosts)
    throw user_error("synth: subnet count must be in [1, hosts]");
  if (prefix_len < 4 || prefix_len > 30)
    throw user_error("synth: prefix length must be in [4, 30]");
  if (feature_dim <= 0) throw user_error("synth: feature dimension must be positive");
  if (classes.empty()) throw user_error("synth: at least one class is required");
  if (classes.size() > 60) throw user_error("synth: at most 60 classes supported");
  long long total = 0;
  for (const auto& c : classes) {
    if (c.flows <= 0) throw user_error("synth: class '" + c.name + "' has zero flows");
    if (c.src_hosts <= 0 || c.src_hosts > hosts)
      throw user_error("synth: class '" + c.name + "' src_hosts out of range");
    if (c.dst_count <= 0 || c.dst_count > 255)
      throw user_error("synth: class '" + c.name + "' dst_count out of range [1, 255]");
    if (c.src_ports < 0 || c.src_ports > 64)
      throw user_error("synth: class '" + c.name + "' src_ports out of range [0, 64]");
    if (c.feature_scale <= 0) throw user_error("synth: feature_scale must be positive");
    if ((c.name == kBenignClass) == c.attack)
      throw user_error("synth: class '" + c.name + "' attack flag conflicts with its name");
    total += c.flows;
  }
  if (total == 0) throw user_error("synth: zero flows requested");
  const int shift = 32 - prefix_len;
  const std::uint64_t base0 = 0x0A000000ull >> shift;
  if (base0 + static_cast<std::uint64_t>(subnets) + 1 >= (1ull << prefix_len))
    throw user_error("synth: too many subnets for the prefix length");
  const std::uint64_t per_subnet = static_cast<std::uint64_t>(hosts) / subnets + 2;
  if (per_subnet >= (1ull << shift))
    throw user_error("synth: too many hosts per subnet for the prefix length");
}

namespace {

double hash01(std::uint64_t a, std::uint64_t b) {
  return static_cast<double>(mix_seed(a, b) >> 11) * 0x1.0p-53;
}

}  // namespace

Dataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const int shift = 32 - spec.prefix_len;
  const int num_classes = static_cast<int>(spec.classes.size());

  // host h lives in subnet h % subnets
  std::vector<IPv4> host_ip(spec.hosts);
  for (int h = 0; h < spec.hosts; ++h) {
    const std::uint32_t subnet = static_cast<std::uint32_t>(h % spec.subnets) + 1;
    const IPv4 base = 0x0A000000u + (subnet << shift);
    host_ip[h] = base + static_cast<std::uint32_t>(h / spec.subnets) + 1;
  }

  // classes claim consecutive host slices (mod hosts)
  std::vector<int> slice_start(num_classes);
  int cursor = 0;
  for (int c = 0; c < num_classes; ++c) {
    slice_start[c] = cursor % spec.hosts;
    cursor += spec.classes[c].src_hosts;
  }

  std::mt19937_64 rng(spec.seed);
  Dataset dataset;
  for (int j = 0; j < spec.feature_dim; ++j)
    dataset.feature_names.push_back("FEAT_" + std::to_string(j));

  for (int c = 0; c < num_classes; ++c) {
    const SynthClassSpec& cls = spec.classes[c];
    std::vector<double> center(spec.feature_dim);
    for (int j = 0; j < spec.feature_dim; ++j) {
      const bool dedicated = (j % num_classes) == (c % num_classes);
      center[j] = spec.class_separation * (dedicated ? 1.0 : 0.0) +
                  0.35 * spec.class_separation * hash01(c, j);
    }
    std::uniform_int_distribution<int> pick_host(0, cls.src_hosts - 1);
    std::uniform_int_distribution<int> pick_dst(0, cls.dst_count - 1);
    std::uniform_int_distribution<int> ephemeral(32768, 60999);
    for (int t = 0; t < cls.flows; ++t) {
      FlowRecord flow;
      const int host = (slice_start[c] + pick_host(rng)) % spec.hosts;
      flow.src_ip = host_ip[host];
      const int d = pick_dst(rng);
      flow.dst_ip = 0xC6120000u + (static_cast<std::uint32_t>(c + 1) << 8) + d + 1;
      flow.dst_port = static_cast<std::uint16_t>(1000 * (c + 1) + d);
      if (cls.src_ports > 0) {
        std::uniform_int_distribution<int> pick_port(0, cls.src_ports - 1);
        flow.src_port = static_cast<std::uint16_t>(40000 + 100 * c + pick_port(rng));
      } else {
        flow.src_port = static_cast<std::uint16_t>(ephemeral(rng));
      }
      flow.protocol = (c % 2 == 0) ? 6 : 17;
      flow.features.resize(spec.feature_dim);
      for (int j = 0; j < spec.feature_dim; ++j) {
        std::normal_distribution<double> noise(center[j], cls.feature_scale);
        flow.features[j] = noise(rng);
      }
      flow.label = cls.attack ? 1 : 0;
      flow.attack_class = cls.name;
      dataset.flows.push_back(std::move(flow));
    }
  }
  std::shuffle(dataset.flows.begin(), dataset.flows.end(), rng);
  return dataset;
}

}  // namespace bsgat
