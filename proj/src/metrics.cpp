#include "bsgat/metrics.hpp"

#include <algorithm>
#include <array>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "bsgat/errors.hpp"

namespace bsgat {

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> pred,
                                 int num_classes) {
  if (truth.size() != pred.size())
    throw user_error("label vectors differ in length: " + std::to_string(truth.size()) +
                     " vs " + std::to_string(pred.size()));
  if (num_classes <= 0) throw user_error("class count must be positive");
  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k] < 0 || truth[k] >= num_classes || pred[k] < 0 || pred[k] >= num_classes)
      throw user_error("label out of range at position " + std::to_string(k));
    ++cm.at(truth[k], pred[k]);
  }
  return cm;
}

EvalReport classification_metrics(std::span<const int> truth, std::span<const int> pred,
                                  const LabelSpace& labels) {
  if (truth.empty()) throw user_error("no samples to evaluate");
  const int c = labels.size();
  EvalReport report;
  report.confusion = confusion_matrix(truth, pred, c);
  report.total = static_cast<std::int64_t>(truth.size());

  std::int64_t correct = 0;
  for (int k = 0; k < c; ++k) correct += report.confusion.at(k, k);
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.total);

  for (int k = 0; k < c; ++k) {
    ClassMetrics m;
    m.name = labels.classes[k];
    std::int64_t tp = report.confusion.at(k, k);
    std::int64_t fn = 0;
    std::int64_t fp = 0;
    for (int r = 0; r < c; ++r) {
      if (r == k) continue;
      fn += report.confusion.at(k, r);
      fp += report.confusion.at(r, k);
    }
    m.support = tp + fn;
    if (tp + fp > 0) {
      m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    } else {
      m.precision_defined = false;
    }
    if (m.support > 0) {
      m.recall = static_cast<double>(tp) / static_cast<double>(m.support);
    } else {
      m.recall_defined = false;
    }
    if (m.precision_defined && m.recall_defined && m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
      m.f1_defined = false;
    }
    report.per_class.push_back(std::move(m));
  }

  for (const ClassMetrics& m : report.per_class) {
    report.macro_precision += m.precision;
    report.macro_recall += m.recall;
    report.macro_f1 += m.f1;
    const double w = static_cast<double>(m.support) / static_cast<double>(report.total);
    report.weighted_precision += w * m.precision;
    report.weighted_recall += w * m.recall;
    report.weighted_f1 += w * m.f1;
  }
  report.macro_precision /= c;
  report.macro_recall /= c;
  report.macro_f1 /= c;
  return report;
}

double gini_coefficient(std::span<const double> values) {
  if (values.empty()) throw user_error("cannot compute Gini of an empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 0.0) throw user_error("Gini requires non-negative values");
  double total = 0.0;
  for (double v : sorted) total += v;
  if (total <= 0.0)
    throw user_error("degenerate sequence: every value is zero");

  // Lorenz curve through (k/n, y_k) with y_k the cumulative share after the
  // k smallest entries; the area below is a sum of trapezoids of width 1/n.
  const double n = static_cast<double>(sorted.size());
  double cumulative = 0.0;
  double prev_share = 0.0;
  double area = 0.0;
  for (double v : sorted) {
    cumulative += v;
    const double share = cumulative / total;
    area += (prev_share + share) / (2.0 * n);
    prev_share = share;
  }
  return 1.0 - 2.0 * area;
}

double gini_coefficient(std::span<const int> values) {
  std::vector<double> v(values.begin(), values.end());
  return gini_coefficient(std::span<const double>(v));
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["total"] = report.total;
  j["accuracy"] = report.accuracy;
  j["macro"] = {{"precision", report.macro_precision},
                {"recall", report.macro_recall},
                {"f1", report.macro_f1}};
  j["weighted"] = {{"precision", report.weighted_precision},
                   {"recall", report.weighted_recall},
                   {"f1", report.weighted_f1}};
  j["classes"] = nlohmann::json::array();
  for (const ClassMetrics& m : report.per_class) {
    j["classes"].push_back({{"name", m.name},
                            {"support", m.support},
                            {"precision", m.precision},
                            {"precision_defined", m.precision_defined},
                            {"recall", m.recall},
                            {"recall_defined", m.recall_defined},
                            {"f1", m.f1},
                            {"f1_defined", m.f1_defined}});
  }
  const int c = report.confusion.num_classes;
  j["confusion"] = nlohmann::json::array();
  for (int r = 0; r < c; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < c; ++k) row.push_back(report.confusion.at(r, k));
    j["confusion"].push_back(row);
  }
  return j.dump(2) + "\n";
}

namespace {

std::string fixed4(double v, bool defined) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4) << v;
  std::string s = ss.str();
  if (!defined) s += '*';
  return s;
}

}  // namespace

std::string report_to_table(const EvalReport& report) {
  std::vector<std::array<std::string, 5>> rows;
  rows.push_back({"class", "support", "precision", "recall", "f1"});
  bool any_undefined = false;
  for (const ClassMetrics& m : report.per_class) {
    any_undefined |= !(m.precision_defined && m.recall_defined && m.f1_defined);
    rows.push_back({m.name, std::to_string(m.support), fixed4(m.precision, m.precision_defined),
                    fixed4(m.recall, m.recall_defined), fixed4(m.f1, m.f1_defined)});
  }
  const std::string total = std::to_string(report.total);
  rows.push_back({"accuracy", total, "", "", fixed4(report.accuracy, true)});
  rows.push_back({"macro avg", total, fixed4(report.macro_precision, true),
                  fixed4(report.macro_recall, true), fixed4(report.macro_f1, true)});
  rows.push_back({"weighted avg", total, fixed4(report.weighted_precision, true),
                  fixed4(report.weighted_recall, true), fixed4(report.weighted_f1, true)});

  std::array<std::size_t, 5> width{};
  for (const auto& row : rows)
    for (int c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());

  std::ostringstream out;
  for (const auto& row : rows) {
    for (int c = 0; c < 5; ++c) {
      if (c > 0) out << "  ";
      // names flush left, numbers flush right
      if (c == 0)
        out << row[c] << std::string(width[c] - row[c].size(), ' ');
      else
        out << std::string(width[c] - row[c].size(), ' ') << row[c];
    }
    out << '\n';
  }
  if (any_undefined) out << "* undefined for this split; reported as 0\n";
  return out.str();
}

void write_embeddings_csv(std::ostream& out, const Matrix& embeddings,
                          std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != static_cast<std::size_t>(embeddings.rows) ||
      pred.size() != static_cast<std::size_t>(embeddings.rows))
    throw user_error("embedding rows and label vectors differ in length");
  out << "node,true_label,pred_label";
  for (int c = 0; c < embeddings.cols; ++c) out << ",e" << c;
  out << '\n';
  for (int r = 0; r < embeddings.rows; ++r) {
    out << r << ',' << truth[r] << ',' << pred[r];
    for (int c = 0; c < embeddings.cols; ++c) out << ',' << format_double(embeddings(r, c));
    out << '\n';
  }
}

}  // namespace bsgat
