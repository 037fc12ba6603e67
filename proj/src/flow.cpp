#include "bsgat/flow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "bsgat/errors.hpp"

namespace bsgat {

IPv4 parse_ipv4(std::string_view text) {
  IPv4 addr = 0;
  const char* p = text.data();
  const char* end = p + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(p, end, value);
    if (ec != std::errc{} || ptr == p || value > 255)
      throw user_error("invalid IPv4 address '" + std::string(text) + "'");
    addr = (addr << 8) | value;
    p = ptr;
    if (octet < 3) {
      if (p == end || *p != '.')
        throw user_error("invalid IPv4 address '" + std::string(text) + "'");
      ++p;
    }
  }
  if (p != end) throw user_error("invalid IPv4 address '" + std::string(text) + "'");
  return addr;
}

std::string format_ipv4(IPv4 addr) {
  std::string out;
  out.reserve(15);
  for (int shift = 24; shift >= 0; shift -= 8) {
    out += std::to_string((addr >> shift) & 0xffu);
    if (shift > 0) out += '.';
  }
  return out;
}

int LabelSpace::index_of(const FlowRecord& flow) const {
  if (mode == Mode::binary) return flow.label;
  int idx = index_of_name(flow.attack_class);
  if (idx < 0) throw user_error("flow class '" + flow.attack_class + "' is not in the label space");
  return idx;
}

int LabelSpace::index_of_name(const std::string& name) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == name) return static_cast<int>(i);
  return -1;
}

LabelSpace LabelSpace::binary() {
  return LabelSpace{Mode::binary, {kBenignClass, "Attack"}};
}

LabelSpace LabelSpace::from_flows(std::span<const FlowRecord> flows, Mode mode) {
  if (mode == Mode::binary) return binary();
  std::set<std::string> names;
  for (const auto& f : flows) names.insert(f.attack_class);
  LabelSpace space;
  space.mode = Mode::multiclass;
  if (names.erase(kBenignClass) > 0) space.classes.push_back(kBenignClass);
  space.classes.insert(space.classes.end(), names.begin(), names.end());
  return space;
}

int feature_dim(std::span<const FlowRecord> flows, const FeatureOptions& opts) {
  if (flows.empty()) return 0;
  return static_cast<int>(flows.front().features.size()) + (opts.include_port_protocol ? 3 : 0);
}

namespace {

void assemble(const FlowRecord& flow, const FeatureOptions& opts, double* out) {
  std::size_t i = 0;
  for (double v : flow.features) out[i++] = v;
  if (opts.include_port_protocol) {
    out[i++] = static_cast<double>(flow.src_port);
    out[i++] = static_cast<double>(flow.dst_port);
    out[i++] = static_cast<double>(flow.protocol);
  }
}

void check_uniform(std::span<const FlowRecord> flows) {
  const std::size_t dim = flows.front().features.size();
  for (const auto& f : flows)
    if (f.features.size() != dim)
      throw user_error("feature dimension mismatch: expected " + std::to_string(dim) +
                       ", got " + std::to_string(f.features.size()));
}

}  // namespace

NormalizationStats fit_normalizer(std::span<const FlowRecord> train_flows,
                                  const FeatureOptions& opts, std::string fitted_on) {
  if (train_flows.empty()) throw user_error("empty training set");
  check_uniform(train_flows);
  const int dim = feature_dim(train_flows, opts);
  NormalizationStats stats;
  stats.opts = opts;
  stats.fitted_on = std::move(fitted_on);
  stats.min.assign(dim, std::numeric_limits<double>::infinity());
  stats.max.assign(dim, -std::numeric_limits<double>::infinity());
  std::vector<double> buf(dim);
  for (const auto& flow : train_flows) {
    assemble(flow, opts, buf.data());
    for (int j = 0; j < dim; ++j) {
      stats.min[j] = std::min(stats.min[j], buf[j]);
      stats.max[j] = std::max(stats.max[j], buf[j]);
    }
  }
  return stats;
}

Matrix normalize(std::span<const FlowRecord> flows, const NormalizationStats& stats) {
  if (!flows.empty()) {
    check_uniform(flows);
    if (feature_dim(flows, stats.opts) != stats.dim())
      throw user_error("feature dimension mismatch: stats fitted on " +
                       std::to_string(stats.dim()) + " features, input has " +
                       std::to_string(feature_dim(flows, stats.opts)));
  }
  const int dim = stats.dim();
  Matrix out(static_cast<int>(flows.size()), dim);
  std::vector<double> buf(dim);
  for (std::size_t r = 0; r < flows.size(); ++r) {
    assemble(flows[r], stats.opts, buf.data());
    double* row = out.row(static_cast<int>(r));
    for (int j = 0; j < dim; ++j) {
      const double range = stats.max[j] - stats.min[j];
      if (range <= 0.0) {
        row[j] = 0.0;  // constant column
      } else {
        row[j] = std::clamp((buf[j] - stats.min[j]) / range, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace bsgat
