// Gate suite: one numbered check per release property, one line of output
// each, nonzero exit when a gating check fails.  The last check needs a real
// dataset on disk and is informational either way.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "bsgat/dataset.hpp"
#include "bsgat/engine.hpp"
#include "bsgat/errors.hpp"
#include "bsgat/flow.hpp"
#include "bsgat/graph.hpp"
#include "bsgat/metrics.hpp"
#include "bsgat/model.hpp"
#include "bsgat/pipeline.hpp"
#include "bsgat/trainer.hpp"

using namespace bsgat;
namespace fs = std::filesystem;

namespace {

struct failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& what) {
  if (!cond) throw failure(what);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

int g_failures = 0;

// budget_seconds == 0 means untimed; otherwise overrunning fails the check
void criterion(int number, const std::string& title, double budget_seconds,
               const std::function<std::string()>& body) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  try {
    detail = body();
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (ok && budget_seconds > 0 && secs > budget_seconds) {
    ok = false;
    detail += " [exceeded " + fmt(budget_seconds) + "s budget]";
  }
  char head[16];
  std::snprintf(head, sizeof(head), "[%2d] ", number);
  std::cout << head << (ok ? "PASS " : "FAIL ") << title << " (" << fmt(secs) << "s)"
            << (detail.empty() ? "" : " -- " + detail) << std::endl;
  if (!ok) ++g_failures;
}

int pick(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double unit(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

FlowRecord mk(const char* sip, std::uint16_t sport, const char* dip,
              std::uint16_t dport) {
  FlowRecord f;
  f.src_ip = parse_ipv4(sip);
  f.src_port = sport;
  f.dst_ip = parse_ipv4(dip);
  f.dst_port = dport;
  f.protocol = 6;
  f.features = {0.0};
  f.attack_class = "Benign";
  return f;
}

// builds with both constructions and demands the exact expected edge set
void require_edges(const std::vector<FlowRecord>& flows, const GraphConfig& cfg,
                   std::vector<std::tuple<int, int, EdgeClass, double>> want,
                   const std::string& tag) {
  const BehaviorGraph g = build_graph(flows, cfg);
  expect(g == build_graph_bruteforce(flows, cfg),
         tag + ": fast and reference builders disagree");
  std::sort(want.begin(), want.end());
  expect(g.edges().size() == want.size(),
         tag + ": expected " + std::to_string(want.size()) + " edge(s), got " +
             std::to_string(g.edges().size()));
  for (std::size_t k = 0; k < want.size(); ++k) {
    const Edge& e = g.edges()[k];
    const auto& [wi, wj, wcls, wweight] = want[k];
    expect(e.i == wi && e.j == wj && e.cls == wcls,
           tag + ": edge " + std::to_string(k) + " mismatch");
    bool found = false;
    for (const NeighborEntry& nb : g.neighbors(wi))
      if (nb.node == wj) {
        expect(nb.eb == wweight, tag + ": weight of (" + std::to_string(wi) + ", " +
                                     std::to_string(wj) + ") is " + fmt(nb.eb) +
                                     ", wanted " + fmt(wweight));
        found = true;
      }
    expect(found, tag + ": adjacency is missing an edge");
  }
}

// independent inequality oracle: rank form of the Lorenz-trapezoid area,
// identical in exact arithmetic, shared code zero
double gini_oracle(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double total = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    total += values[i];
    weighted += static_cast<double>(i + 1) * values[i];
  }
  return 2.0 * weighted / (n * total) - (n + 1.0) / n;
}

// comparison construction: endpoints as nodes, one edge per flow
double endpoint_graph_gini(const std::vector<FlowRecord>& flows) {
  std::map<std::uint64_t, int> degree;
  for (const FlowRecord& f : flows) {
    ++degree[(static_cast<std::uint64_t>(f.src_ip) << 16) | f.src_port];
    ++degree[(static_cast<std::uint64_t>(f.dst_ip) << 16) | f.dst_port];
  }
  std::vector<int> degrees;
  degrees.reserve(degree.size());
  for (const auto& [key, d] : degree) degrees.push_back(d);
  return gini_coefficient(std::span<const int>(degrees));
}

double forward_loss(const ModelParams& params, const TrainConfig& cfg, const Matrix& X,
                    const BatchPlan& plan, std::span<const int> truth) {
  ForwardCache cache = forward(params, cfg, X, plan, false, nullptr);
  return loss_value(cache.logits, truth);
}

struct Scored {
  double weighted_f1 = 0.0;
  int best_epoch = 0;
};

// train on the given splits and report the test-split weighted F1
Scored fit_and_score(const Dataset& d, const BehaviorGraph& g, const SplitIndices& sp,
                     const LabelSpace& space, const FeatureOptions& fo, TrainConfig tc,
                     int threads = 1) {
  std::vector<FlowRecord> train_flows;
  train_flows.reserve(sp.train.size());
  for (int i : sp.train) train_flows.push_back(d.flows[i]);
  const NormalizationStats norm = fit_normalizer(train_flows, fo);
  const Matrix X = normalize(d.flows, norm);
  std::vector<int> labels(d.flows.size());
  for (std::size_t i = 0; i < d.flows.size(); ++i) labels[i] = space.index_of(d.flows[i]);

  TrainInputs in;
  in.graph = &g;
  in.features = &X;
  in.labels = labels;
  in.train_nodes = sp.train;
  in.val_nodes = sp.val;
  in.label_space = space;
  in.norm = norm;
  const TrainResult result = train_model(in, tc, threads);

  const Prediction p = predict(result.best.params, result.best.train, g, X, threads);
  std::vector<int> truth, pred;
  truth.reserve(sp.test.size());
  pred.reserve(sp.test.size());
  for (int i : sp.test) {
    truth.push_back(labels[i]);
    pred.push_back(p.labels[i]);
  }
  const EvalReport report = classification_metrics(truth, pred, space);
  return Scored{report.weighted_f1, result.best_epoch};
}

int sh(const std::string& cmd) {
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  expect(in.good(), "missing artifact " + path.string());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

int main() {
  std::cout << "acceptance gate, library + " << BSGAT_CLI_PATH << "\n";

  // 1: the hashed construction against the quadratic reference on randomized
  // corpora spanning the supported size range
  criterion(1, "graph builder matches the quadratic reference on random corpora", 60.0, [] {
    std::mt19937_64 rng(2026);
    int datasets = 0;
    std::size_t flows_total = 0, edges_total = 0;
    for (int t = 0; t < 22; ++t) {
      SynthSpec spec;
      spec.seed = 5000 + static_cast<std::uint64_t>(t);
      spec.hosts = pick(rng, 6, 60);
      spec.subnets = pick(rng, 2, std::min(6, spec.hosts));
      spec.prefix_len = std::array{22, 24, 26}[pick(rng, 0, 2)];
      spec.feature_dim = 1;
      const int total = t == 0 ? 100 : (t == 21 ? 5000 : pick(rng, 100, 5000));
      const int k = pick(rng, 2, 5);
      int rest = total;
      for (int c = 0; c < k; ++c) {
        SynthClassSpec cls;
        cls.name = c == 0 ? "Benign" : "C" + std::to_string(c);
        cls.attack = c > 0;
        const int even = rest / (k - c);
        cls.flows = c + 1 == k
                        ? rest
                        : std::max(1, static_cast<int>(even * (0.6 + 0.8 * unit(rng))));
        cls.flows = std::min(cls.flows, rest - (k - c - 1));
        rest -= cls.flows;
        cls.src_hosts = pick(rng, std::max(2, spec.hosts / 2), spec.hosts);
        cls.dst_count = pick(rng, 1, 6);
        cls.src_ports = pick(rng, 0, 3);
        spec.classes.push_back(cls);
      }
      const Dataset d = generate_synthetic(spec);

      GraphConfig gc;
      gc.lambda = 0.5 + 0.5 * unit(rng);
      gc.mu = gc.lambda * (0.05 + 0.9 * unit(rng));
      gc.prefix_len = std::array{16, 22, 24, 28}[pick(rng, 0, 3)];
      const BehaviorGraph fast = build_graph(d.flows, gc, 1 + t % 4);
      const BehaviorGraph slow = build_graph_bruteforce(d.flows, gc);
      expect(fast == slow, "dataset " + std::to_string(t) + " (" +
                               std::to_string(d.flows.size()) + " flows) diverged");
      ++datasets;
      flows_total += d.flows.size();
      edges_total += fast.edges().size();
    }
    expect(datasets >= 20, "not enough datasets");
    return std::to_string(datasets) + " datasets, " + std::to_string(flows_total) +
           " flows, " + std::to_string(edges_total) + " edges";
  });

  // 2: each edge rule, the S > M > O priority, the own-area exclusion and the
  // weight map on handcrafted flow sets
  criterion(2, "edge rules verified on handcrafted flow sets", 0, [] {
    const GraphConfig std_cfg;
    using E = EdgeClass;

    require_edges({mk("10.0.0.1", 1111, "1.1.1.1", 80),
                   mk("10.0.0.1", 2222, "2.2.2.2", 443)},
                  std_cfg, {{0, 1, E::S, 1.0}}, "same-host rule");

    require_edges({mk("10.0.0.1", 1111, "1.1.1.1", 80),
                   mk("10.0.0.1", 2222, "1.1.1.1", 80)},
                  std_cfg, {{0, 1, E::S, 1.0}}, "same-host outranks same-subnet");

    require_edges({mk("10.0.0.1", 1111, "1.1.1.1", 80),
                   mk("10.0.0.2", 2222, "1.1.1.1", 80)},
                  std_cfg, {{0, 1, E::M, 0.85}}, "same-subnet rule");

    require_edges({mk("10.0.0.1", 1111, "1.1.1.1", 80),
                   mk("10.0.0.2", 2222, "1.1.1.1", 81)},
                  std_cfg, {}, "same-subnet needs the full destination service");

    require_edges({mk("10.0.0.1", 1111, "1.1.1.1", 80),
                   mk("10.0.1.2", 2222, "1.1.1.1", 80)},
                  std_cfg, {}, "same-subnet does not cross subnets");

    require_edges({mk("10.0.0.1", 5000, "9.9.9.9", 443),
                   mk("10.0.0.2", 5000, "9.9.9.9", 443)},
                  std_cfg, {{0, 1, E::M, 0.85}},
                  "cross-subnet pattern inside one subnet stays a subnet edge");

    // three subnets: 10.0.0.x and 10.0.1.x are nearest siblings of each
    // other; 192.168.0.x is unrelated to both and adopts the numerically
    // smallest nearest area, 10.0.0.x
    require_edges({mk("10.0.0.1", 5000, "9.9.9.9", 443),
                   mk("10.0.1.1", 5000, "9.9.9.9", 443),
                   mk("192.168.0.1", 5000, "9.9.9.9", 443)},
                  std_cfg, {{0, 1, E::O, 0.7}, {0, 2, E::O, 0.7}},
                  "cross-subnet rule follows the nearest-sibling relation");

    GraphConfig custom;
    custom.lambda = 0.6;
    custom.mu = 0.25;
    require_edges({mk("10.0.0.1", 1000, "1.1.1.1", 80),
                   mk("10.0.0.1", 2000, "2.2.2.2", 443),
                   mk("10.0.0.9", 3000, "1.1.1.1", 80),
                   mk("10.0.1.7", 1000, "1.1.1.1", 80)},
                  custom,
                  {{0, 1, E::S, 1.0}, {0, 2, E::M, 0.6}, {0, 3, E::O, 0.25}},
                  "weight map");
    return std::string("8 handcrafted cases, exact");
  });

  // 3: inequality measure against an independent oracle plus its two
  // defining laws on random vectors
  criterion(3, "degree inequality matches the oracle and obeys its laws", 0, [] {
    const std::vector<int> flat{3, 3, 3, 3};
    expect(gini_coefficient(std::span<const int>(flat)) == 0.0, "flat vector not 0");

    const std::vector<double> ramp{1, 2, 3, 4};
    expect(std::abs(gini_coefficient(std::span<const double>(ramp)) -
                    gini_oracle({1, 2, 3, 4})) <= 1e-12,
           "ramp vector off oracle");
    const std::vector<double> spike{0, 0, 0, 10};
    expect(std::abs(gini_coefficient(std::span<const double>(spike)) -
                    gini_oracle({0, 0, 0, 10})) <= 1e-12,
           "spike vector off oracle");

    std::mt19937_64 rng(303);
    for (int t = 0; t < 100; ++t) {
      const int n = pick(rng, 2, 50);
      std::vector<double> v(n);
      for (double& x : v) x = 10.0 * unit(rng);
      v[static_cast<std::size_t>(pick(rng, 0, n - 1))] += 1.0;  // keep the total positive

      const double base = gini_coefficient(std::span<const double>(v));
      expect(std::abs(base - gini_oracle(v)) <= 1e-12,
             "random vector " + std::to_string(t) + " off oracle");

      std::vector<double> scaled = v;
      const double c = 0.5 + 9.5 * unit(rng);
      for (double& x : scaled) x *= c;
      expect(std::abs(gini_coefficient(std::span<const double>(scaled)) - base) <= 1e-12,
             "scale invariance broke on vector " + std::to_string(t));

      auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
      if (*hi_it > *lo_it) {
        std::vector<double> evened = v;
        const double transfer = 0.5 * unit(rng) * (*hi_it - *lo_it);
        evened[static_cast<std::size_t>(hi_it - v.begin())] -= transfer;
        evened[static_cast<std::size_t>(lo_it - v.begin())] += transfer;
        if (transfer > 0)
          expect(gini_coefficient(std::span<const double>(evened)) < base,
                 "rich-to-poor transfer failed to reduce inequality");
      }
    }
    return std::string("frozen values ") + fmt(gini_oracle({1, 2, 3, 4})) + "/" +
           fmt(gini_oracle({0, 0, 0, 10})) + ", 100 random vectors";
  });

  // 4: the behavior graph should spread degrees more evenly than the
  // endpoint construction on identical traffic
  criterion(4, "behavior graph spreads degrees more evenly than endpoints", 0, [] {
    std::string seen;
    for (std::uint64_t seed : {404u, 405u, 406u}) {
      SynthSpec spec = default_synth();
      spec.seed = seed;
      const Dataset d = generate_synthetic(spec);
      const BehaviorGraph g = build_graph(d.flows, GraphConfig{});
      const std::vector<int> degrees = g.degrees();
      const double behavior = gini_coefficient(std::span<const int>(degrees));
      const double endpoint = endpoint_graph_gini(d.flows);
      expect(behavior < endpoint, "direction reversed: behavior " + fmt(behavior) +
                                      " vs endpoint " + fmt(endpoint));
      seen += (seen.empty() ? "" : ", ") + fmt(behavior) + " < " + fmt(endpoint);
    }
    return seen;
  });

  // 5: analytic gradients against central finite differences on a small but
  // fully wired model
  criterion(5, "analytic gradients match finite differences", 30.0, [] {
    SynthSpec spec;
    spec.hosts = 5;
    spec.subnets = 2;
    spec.feature_dim = 4;
    spec.seed = 505;
    spec.classes = {SynthClassSpec{"Benign", false, 12, 3, 2, 0, 1.0},
                    SynthClassSpec{"DoS", true, 8, 2, 1, 1, 1.0}};
    const Dataset d = generate_synthetic(spec);
    const BehaviorGraph g = build_graph(d.flows, GraphConfig{});
    const NormalizationStats norm = fit_normalizer(d.flows, FeatureOptions{false});
    const Matrix X = normalize(d.flows, norm);
    std::vector<int> labels;
    for (const FlowRecord& f : d.flows) labels.push_back(f.label);

    TrainConfig cfg;
    cfg.hidden = 8;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.dropout = 0.0;
    ModelParams params = init_params(X.cols, 2, cfg, 506);

    std::vector<int> targets(d.flows.size());
    std::iota(targets.begin(), targets.end(), 0);
    const BatchPlan plan = make_plan(g, targets, cfg.layers);
    std::vector<int> truth;
    for (int t : plan.targets) truth.push_back(labels[static_cast<std::size_t>(t)]);

    const ForwardCache cache = forward(params, cfg, X, plan, true, nullptr);
    ModelParams grads = zeros_like(params);
    backward(params, cfg, X, plan, cache, truth, grads);

    const double eps = 1e-5;
    const std::vector<TensorRef> prefs = tensor_refs(params);
    const std::vector<TensorRef> grefs = tensor_refs(grads);
    double worst = 0.0;
    int checked = 0;
    for (std::size_t t = 0; t < prefs.size(); ++t) {
      for (std::size_t i = 0; i < prefs[t].data->size(); ++i) {
        double& w = (*prefs[t].data)[i];
        const double orig = w;
        w = orig + eps;
        const double lp = forward_loss(params, cfg, X, plan, truth);
        w = orig - eps;
        const double lm = forward_loss(params, cfg, X, plan, truth);
        w = orig;
        const double fd = (lp - lm) / (2.0 * eps);
        const double an = (*grefs[t].data)[i];
        const double denom = std::max(std::abs(fd), std::abs(an));
        const double rel = denom < 1e-8 ? 0.0 : std::abs(fd - an) / denom;
        expect(denom < 1e-8 ? std::abs(fd - an) <= 1e-8 : rel <= 1e-4,
               prefs[t].name + "[" + std::to_string(i) + "]: analytic " + fmt(an) +
                   " vs numeric " + fmt(fd));
        worst = std::max(worst, rel);
        ++checked;
      }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d nodes, %d parameters, worst rel err %.2e",
                  g.size(), checked, worst);
    return std::string(buf);
  });

  // 6: attention rows stay normalized across random models and graphs
  criterion(6, "attention rows are normalized on random models and graphs", 0, [] {
    std::mt19937_64 rng(606);
    double worst = 0.0;
    for (int r = 0; r < 10; ++r) {
      SynthSpec spec;
      spec.hosts = pick(rng, 6, 40);
      spec.subnets = pick(rng, 2, std::min(5, spec.hosts));
      spec.feature_dim = pick(rng, 3, 6);
      spec.seed = 6000 + static_cast<std::uint64_t>(r);
      spec.classes = {SynthClassSpec{"Benign", false, pick(rng, 40, 120),
                                     std::max(2, spec.hosts / 2), pick(rng, 1, 4),
                                     0, 1.0},
                      SynthClassSpec{"DoS", true, pick(rng, 20, 80),
                                     std::max(1, spec.hosts / 3), pick(rng, 1, 3),
                                     pick(rng, 0, 2), 1.0}};
      const Dataset d = generate_synthetic(spec);
      const BehaviorGraph g = build_graph(d.flows, GraphConfig{});
      const NormalizationStats norm = fit_normalizer(d.flows, FeatureOptions{false});
      const Matrix X = normalize(d.flows, norm);

      TrainConfig cfg;
      cfg.hidden = std::array{4, 6, 8, 12}[r % 4];
      cfg.layers = 1 + r % 3;
      cfg.heads = 1 + r % 4;
      cfg.dropout = 0.0;
      cfg.attention = std::array{AttentionMode::eq5, AttentionMode::eq6,
                                 AttentionMode::plain}[r % 3];
      const ModelParams params = init_params(X.cols, 2, cfg, 6100 + r);

      std::vector<int> all(g.size());
      std::iota(all.begin(), all.end(), 0);
      const BatchPlan plan = make_plan(g, all, cfg.layers);
      const ForwardCache cache = forward(params, cfg, X, plan, false, nullptr);
      for (std::size_t l = 0; l < cache.layers.size(); ++l) {
        const LevelBlock& level = plan.levels[l];
        for (const HeadCache& hc : cache.layers[l].heads)
          for (std::size_t row = 0; row < level.out_nodes.size(); ++row) {
            double sum = 0.0;
            for (int s = level.offsets[row]; s < level.offsets[row + 1]; ++s)
              sum += hc.alpha[static_cast<std::size_t>(s)];
            worst = std::max(worst, std::abs(sum - 1.0));
          }
      }
      expect(worst <= 1e-6, "row sum drifted by " + std::to_string(worst));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "10 models, worst row deviation %.2e", worst);
    return std::string(buf);
  });

  // 7: unit behavior weights must collapse the weighted attention onto the
  // unweighted one
  criterion(7, "unit behavior weights reduce weighted attention to plain", 0, [] {
    SynthSpec spec;
    spec.hosts = 9;
    spec.subnets = 3;
    spec.feature_dim = 4;
    spec.seed = 707;
    spec.classes = {SynthClassSpec{"Benign", false, 60, 6, 3, 0, 1.0},
                    SynthClassSpec{"DoS", true, 40, 3, 2, 2, 1.0}};
    const Dataset d = generate_synthetic(spec);
    const NormalizationStats norm = fit_normalizer(d.flows, FeatureOptions{false});
    const Matrix X = normalize(d.flows, norm);

    TrainConfig cfg;
    cfg.hidden = 6;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.dropout = 0.0;
    const ModelParams params = init_params(X.cols, 2, cfg, 708);

    auto max_gap = [&](const BehaviorGraph& g) {
      std::vector<int> all(g.size());
      std::iota(all.begin(), all.end(), 0);
      const BatchPlan plan = make_plan(g, all, cfg.layers);
      TrainConfig weighted = cfg;
      weighted.attention = AttentionMode::eq5;
      TrainConfig plain = cfg;
      plain.attention = AttentionMode::plain;
      const ForwardCache a = forward(params, weighted, X, plan, false, nullptr);
      const ForwardCache b = forward(params, plain, X, plan, false, nullptr);
      double gap = 0.0;
      for (std::size_t i = 0; i < a.logits.data.size(); ++i)
        gap = std::max(gap, std::abs(a.logits.data[i] - b.logits.data[i]));
      return gap;
    };

    // all weights exactly 1: a single subnet admits no cross-subnet edges,
    // and the subnet weight is pinned to 1
    SynthSpec one_area = spec;
    one_area.subnets = 1;
    const Dataset d1 = generate_synthetic(one_area);
    const NormalizationStats norm1 = fit_normalizer(d1.flows, FeatureOptions{false});
    const Matrix X1 = normalize(d1.flows, norm1);
    GraphConfig unit_cfg;
    unit_cfg.lambda = 1.0;
    unit_cfg.mu = 0.5;  // unused: no cross-subnet pairs exist
    const BehaviorGraph g1 = build_graph(d1.flows, unit_cfg);
    const auto count1 = g1.edge_count_by_class();
    expect(count1[1] > 0 && count1[2] == 0, "one-subnet corpus grew O edges");
    {
      std::vector<int> all(g1.size());
      std::iota(all.begin(), all.end(), 0);
      const BatchPlan plan = make_plan(g1, all, cfg.layers);
      TrainConfig weighted = cfg;
      weighted.attention = AttentionMode::eq5;
      TrainConfig plain_cfg = cfg;
      plain_cfg.attention = AttentionMode::plain;
      const ForwardCache a = forward(params, weighted, X1, plan, false, nullptr);
      const ForwardCache b = forward(params, plain_cfg, X1, plan, false, nullptr);
      for (std::size_t i = 0; i < a.logits.data.size(); ++i)
        expect(std::abs(a.logits.data[i] - b.logits.data[i]) <= 1e-12,
               "exact-unit-weight logits diverged");
    }

    // the limit case: every class present, weights within one ulp of 1
    GraphConfig near_unit;
    near_unit.lambda = 1.0;
    near_unit.mu = 1.0 - 1e-12;
    const BehaviorGraph g3 = build_graph(d.flows, near_unit);
    const auto count3 = g3.edge_count_by_class();
    expect(count3[2] > 0, "limit corpus needs O edges to mean anything");
    const double gap = max_gap(g3);
    expect(gap <= 1e-12, "limit-case logits diverged by " + std::to_string(gap));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "exact case 0, limit case %.2e", gap);
    return std::string(buf);
  });

  // 8: relabeling the nodes must relabel the outputs and nothing else
  criterion(8, "node relabeling permutes the logits", 0, [] {
    SynthSpec spec;
    spec.hosts = 12;
    spec.subnets = 3;
    spec.feature_dim = 5;
    spec.seed = 808;
    spec.classes = {SynthClassSpec{"Benign", false, 180, 8, 3, 0, 1.0},
                    SynthClassSpec{"DoS", true, 120, 4, 2, 2, 1.0}};
    const Dataset d = generate_synthetic(spec);
    const BehaviorGraph g = build_graph(d.flows, GraphConfig{});
    const NormalizationStats norm = fit_normalizer(d.flows, FeatureOptions{false});
    const Matrix X = normalize(d.flows, norm);

    TrainConfig cfg;
    cfg.hidden = 8;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.dropout = 0.0;
    const ModelParams params = init_params(X.cols, 2, cfg, 809);

    const int n = g.size();
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(810);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<Edge> relabeled;
    for (Edge e : g.edges()) {
      e.i = perm[static_cast<std::size_t>(e.i)];
      e.j = perm[static_cast<std::size_t>(e.j)];
      relabeled.push_back(e);
    }
    const BehaviorGraph gp(n, g.config(), std::move(relabeled));
    Matrix Xp(n, X.cols);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < X.cols; ++c)
        Xp(perm[static_cast<std::size_t>(i)], c) = X(i, c);

    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    const BatchPlan plan_a = make_plan(g, all, cfg.layers);
    const BatchPlan plan_b = make_plan(gp, all, cfg.layers);
    const ForwardCache a = forward(params, cfg, X, plan_a, false, nullptr);
    const ForwardCache b = forward(params, cfg, Xp, plan_b, false, nullptr);

    double gap = 0.0;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < a.logits.cols; ++c)
        gap = std::max(gap, std::abs(a.logits(i, c) -
                                     b.logits(perm[static_cast<std::size_t>(i)], c)));
    expect(gap <= 1e-9, "permuted logits deviate by " + std::to_string(gap));
    char buf[48];
    std::snprintf(buf, sizeof(buf), "max deviation %.2e", gap);
    return std::string(buf);
  });

  // 9: the full model must learn synthetic four-class traffic and beat the
  // same classifier head without the graph by a clear margin
  criterion(9, "four-class traffic is learned and the graph pays its way", 600.0, [] {
    SynthSpec spec;
    spec.hosts = 48;
    spec.subnets = 6;
    spec.feature_dim = 8;
    spec.class_separation = 1.0;
    spec.seed = 909;
    spec.classes = {SynthClassSpec{"Benign", false, 1600, 24, 8, 0, 1.0},
                    SynthClassSpec{"DoS", true, 1000, 8, 4, 4, 1.0},
                    SynthClassSpec{"Recon", true, 800, 8, 6, 4, 1.0},
                    SynthClassSpec{"Theft", true, 600, 6, 4, 3, 1.0}};
    const Dataset d = generate_synthetic(spec);
    const BehaviorGraph g = build_graph(d.flows, GraphConfig{});

    SplitSpec split;
    split.seed = 910;
    const SplitIndices sp = split_indices(d.flows, split);
    const LabelSpace space = LabelSpace::from_flows(d.flows, LabelSpace::Mode::multiclass);
    const FeatureOptions fo{false};  // ports and protocol would leak the class

    TrainConfig tc;  // stock settings: hidden 128, 2 layers, 3 heads, lr 0.002
    tc.epochs = 60;
    tc.seed = 911;

    TrainConfig baseline = tc;
    baseline.layers = 0;  // same head, same optimizer, no neighborhood

    const Scored model = fit_and_score(d, g, sp, space, fo, tc);
    const Scored flat = fit_and_score(d, g, sp, space, fo, baseline);

    expect(model.weighted_f1 >= 0.95,
           "model weighted F1 " + fmt(model.weighted_f1) + " below 0.95");
    expect(model.weighted_f1 - flat.weighted_f1 >= 0.02,
           "graph gain " + fmt(model.weighted_f1 - flat.weighted_f1) +
               " below 0.02 (model " + fmt(model.weighted_f1) + ", baseline " +
               fmt(flat.weighted_f1) + ")");
    return "model " + fmt(model.weighted_f1) + " (best epoch " +
           std::to_string(model.best_epoch) + ") vs baseline " +
           fmt(flat.weighted_f1) + " on " + std::to_string(d.flows.size()) + " flows";
  });

  // 10: two full command-line runs with one seed must be byte-identical
  criterion(10, "one seed yields one byte stream end to end", 0, [] {
    const fs::path root = fs::temp_directory_path() / "bsgat_acceptance_det";
    fs::remove_all(root);
    const char* config = R"({
      "report_dir": "reports",
      "seed": 77,
      "train_config": {"epochs": 5, "hidden": 16, "heads": 2, "minibatch": 300}
    })";
    for (const char* run : {"a", "b"}) {
      const fs::path dir = root / run;
      fs::create_directories(dir);
      write_text(dir / "cfg.json", config);
      for (const std::string sub : {"synth", "build-graph", "train", "eval"}) {
        const std::string cmd = "cd '" + dir.string() + "' && '" BSGAT_CLI_PATH "' " +
                                sub + " -c cfg.json > " + sub + ".out 2> " + sub +
                                ".err";
        expect(sh(cmd) == 0, sub + " failed in run " + run);
      }
    }
    int compared = 0;
    for (const char* name :
         {"flows.csv", "graph.edges", "model.ckpt", "reports/train_log.jsonl",
          "reports/eval_test.json", "synth.out", "build-graph.out", "train.out",
          "eval.out"}) {
      expect(slurp(root / "a" / name) == slurp(root / "b" / name),
             std::string(name) + " differs between identically seeded runs");
      ++compared;
    }
    fs::remove_all(root);
    return std::to_string(compared) + " artifacts byte-identical";
  });

  // 11: informational spot check on real traffic; needs a local CSV of
  // NetFlow-v2 shape with binary labels, pointed to by BSGAT_NFBOT_CSV
  if (const char* path = std::getenv("BSGAT_NFBOT_CSV")) {
    const auto start = std::chrono::steady_clock::now();
    std::string line;
    try {
      RunConfig rc;  // stock schema and thresholds
      Dataset d = load_flow_csv(path, rc.schema);
      const std::size_t original = d.flows.size();
      SamplingPolicy sampling;
      sampling.fraction = std::min(1.0, 50000.0 / static_cast<double>(original));
      sampling.seed = 1111;
      d.flows = sample_by_class(d.flows, sampling);

      const BehaviorGraph g = build_graph(d.flows, GraphConfig{}, 4);
      SplitSpec split;
      split.seed = 1112;
      const SplitIndices sp = split_indices(d.flows, split);
      TrainConfig tc;
      tc.epochs = 15;
      tc.seed = 1113;
      const Scored scored =
          fit_and_score(d, g, sp, LabelSpace::binary(), FeatureOptions{}, tc, 4);
      line = "binary weighted F1 " + fmt(scored.weighted_f1) + " on " +
             std::to_string(d.flows.size()) + " of " + std::to_string(original) +
             " flows (advisory target 0.95)";
    } catch (const std::exception& e) {
      line = std::string("real-data check did not finish: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "[11] INFO real-data spot check (" << fmt(secs) << "s) -- " << line
              << " [non-gating]" << std::endl;
  } else {
    std::cout << "[11] SKIP real-data spot check -- set BSGAT_NFBOT_CSV to a local "
                 "NetFlow-v2 style CSV to enable [non-gating]"
              << std::endl;
  }

  if (g_failures == 0) {
    std::cout << "acceptance: all gating criteria passed\n";
    return 0;
  }
  std::cout << "acceptance: " << g_failures << " gating criteria FAILED\n";
  return 1;
}
