#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bsgat/flow.hpp"
#include "bsgat/la.hpp"

namespace bsgat {

struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;  // row-major, row = truth, col = prediction

  std::int64_t& at(int truth, int pred) { return counts[truth * num_classes + pred]; }
  std::int64_t at(int truth, int pred) const { return counts[truth * num_classes + pred]; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> pred,
                                 int num_classes);

// Zero-denominator metrics are reported as 0 with the matching flag cleared.
struct ClassMetrics {
  std::string name;
  std::int64_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
  bool operator==(const ClassMetrics&) const = default;
};

struct EvalReport {
  ConfusionMatrix confusion;
  std::vector<ClassMetrics> per_class;
  std::int64_t total = 0;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;  // equals accuracy by construction
  double weighted_f1 = 0.0;
  bool operator==(const EvalReport&) const = default;
};

EvalReport classification_metrics(std::span<const int> truth, std::span<const int> pred,
                                  const LabelSpace& labels);

// Exact Gini coefficient of a non-negative sequence: one minus twice the
// area under the piecewise-linear Lorenz curve, each segment integrated as a
// trapezoid.  No fitting involved.  All-zero input is rejected.
double gini_coefficient(std::span<const double> values);
double gini_coefficient(std::span<const int> values);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

// CSV with header node,true_label,pred_label,e0..e{d-1}; one row per node.
void write_embeddings_csv(std::ostream& out, const Matrix& embeddings,
                          std::span<const int> truth, std::span<const int> pred);

}  // namespace bsgat
