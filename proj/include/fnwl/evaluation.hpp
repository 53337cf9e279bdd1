// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fnwl/error.hpp"
#include "fnwl/version.hpp"

namespace fnwl {

/// K x K counts; rows are actual classes, columns predicted.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix m(rows.size());
    for (std::size_t a = 0; a < rows.size(); ++a) {
      if (rows[a].size() != rows.size())
        throw DimensionError("confusion matrix row " + std::to_string(a) + " has " + std::to_string(rows[a].size()) +
                             " entries, expected " + std::to_string(rows.size()));
      for (std::size_t p = 0; p < rows.size(); ++p) m.at(a, p) = rows[a][p];
    }
    return m;
  }

  std::size_t classes() const { return classes_; }
  std::uint64_t& at(std::size_t actual, std::size_t predicted) { return counts_[actual * classes_ + predicted]; }
  std::uint64_t at(std::size_t actual, std::size_t predicted) const { return counts_[actual * classes_ + predicted]; }

  std::uint64_t row_sum(std::size_t actual) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < classes_; ++p) s += at(actual, p);
    return s;
  }
  std::uint64_t column_sum(std::size_t predicted) const {
    std::uint64_t s = 0;
    for (std::size_t a = 0; a < classes_; ++a) s += at(a, predicted);
    return s;
  }
  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t c = 0; c < classes_; ++c) s += at(c, c);
    return s;
  }
  std::uint64_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

  std::vector<std::vector<std::uint64_t>> rows() const {
    std::vector<std::vector<std::uint64_t>> out(classes_);
    for (std::size_t a = 0; a < classes_; ++a) out[a].assign(counts_.begin() + a * classes_, counts_.begin() + (a + 1) * classes_);
    return out;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion_matrix(std::span<const int> actual, std::span<const int> predicted,
                                        std::size_t classes) {
  if (actual.size() != predicted.size())
    throw DimensionError("confusion matrix needs equal lengths, got " + std::to_string(actual.size()) + " actual and " +
                         std::to_string(predicted.size()) + " predicted");
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < actual.size(); ++i) {
    for (int y : {actual[i], predicted[i]})
      if (y < 0 || static_cast<std::size_t>(y) >= classes)
        throw LabelError("label " + std::to_string(y) + " at position " + std::to_string(i) + " outside 0.." +
                         std::to_string(classes - 1));
    ++m.at(static_cast<std::size_t>(actual[i]), static_cast<std::size_t>(predicted[i]));
  }
  return m;
}

// ----------------------------------------------------------------- metrics

enum class Averaging { macro, micro, weighted };

inline std::string to_string(Averaging a) {
  switch (a) {
    case Averaging::macro: return "macro";
    case Averaging::micro: return "micro";
    case Averaging::weighted: return "weighted";
  }
  return "?";
}

/// Per-class scores. A zero denominator yields 0 and sets the matching flag.
struct ClassMetrics {
  std::uint64_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct AveragedMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool zero_division = false;  // some per-class term had a zero denominator
};

inline std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& m) {
  std::vector<ClassMetrics> out(m.classes());
  for (std::size_t c = 0; c < m.classes(); ++c) {
    auto& r = out[c];
    const auto tp = static_cast<double>(m.at(c, c));
    const std::uint64_t predicted = m.column_sum(c);
    r.support = m.row_sum(c);
    r.precision_undefined = predicted == 0;
    r.recall_undefined = r.support == 0;
    r.precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
    r.recall = r.support == 0 ? 0.0 : tp / static_cast<double>(r.support);
    r.f1_undefined = r.precision + r.recall == 0.0;
    r.f1 = r.f1_undefined ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return out;
}

inline AveragedMetrics classification_metrics(const ConfusionMatrix& m, Averaging averaging = Averaging::weighted) {
  const std::uint64_t total = m.total();
  if (m.classes() == 0 || total == 0) throw MetricError("metrics of an empty confusion matrix are undefined");
  AveragedMetrics out;
  out.accuracy = static_cast<double>(m.trace()) / static_cast<double>(total);
  if (averaging == Averaging::micro) {
    std::uint64_t tp = 0, predicted = 0, actual = 0;
    for (std::size_t c = 0; c < m.classes(); ++c) {
      tp += m.at(c, c);
      predicted += m.column_sum(c);
      actual += m.row_sum(c);
    }
    out.precision = static_cast<double>(tp) / static_cast<double>(predicted);
    out.recall = static_cast<double>(tp) / static_cast<double>(actual);
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    if (tp == 0) out.f1 = 0.0;
    out.zero_division = tp == 0;
    return out;
  }
  const auto classes = per_class_metrics(m);
  for (const auto& c : classes) {
    const double weight = averaging == Averaging::macro
                              ? 1.0 / static_cast<double>(classes.size())
                              : static_cast<double>(c.support) / static_cast<double>(total);
    out.precision += weight * c.precision;
    out.recall += weight * c.recall;
    out.f1 += weight * c.f1;
    out.zero_division = out.zero_division || c.precision_undefined || c.recall_undefined || c.f1_undefined;
  }
  return out;
}

// --------------------------------------------------------------------- AUC

struct AucResult {
  double macro = 0.0;
  std::vector<std::optional<double>> per_class;  // empty for skipped classes
  std::vector<std::size_t> skipped_classes;       // lacking positives or negatives
};

/// Mann-Whitney AUC of `scores` for positives versus the rest, ties counted
/// half, through average ranks.
inline double rank_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double average_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (positive[order[t]]) {
        positive_rank_sum += average_rank;
        ++positives;
      }
    i = j;
  }
  const auto p = static_cast<double>(positives), q = static_cast<double>(n - positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

/// Macro one-vs-rest AUC over the classes that have both positives and
/// negatives. `scores` is N x K row-major.
inline AucResult roc_auc_ovr(std::span<const double> scores, std::span<const int> actual, std::size_t classes) {
  const std::size_t n = actual.size();
  if (scores.size() != n * classes)
    throw DimensionError("AUC needs " + std::to_string(n) + " x " + std::to_string(classes) + " scores, got " +
                         std::to_string(scores.size()));
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("AUC scores must be finite");
  for (int y : actual)
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw LabelError("label " + std::to_string(y) + " out of range");

  AucResult r;
  r.per_class.resize(classes);
  std::vector<double> column(n);
  std::vector<bool> positive(n);
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = scores[i * classes + c];
      positive[i] = static_cast<std::size_t>(actual[i]) == c;
      pos += positive[i];
    }
    if (pos == 0 || pos == n) {
      r.skipped_classes.push_back(c);
      continue;
    }
    r.per_class[c] = rank_auc(column, positive);
    sum += *r.per_class[c];
    ++used;
  }
  if (used == 0) throw MetricError("AUC is undefined: every class lacks positives or negatives");
  r.macro = sum / static_cast<double>(used);
  return r;
}

/// One-hot rows for label-only predictions.
inline std::vector<double> one_hot_scores(std::span<const int> predicted, std::size_t classes) {
  std::vector<double> s(predicted.size() * classes, 0.0);
  for (std::size_t i = 0; i < predicted.size(); ++i) s[i * classes + static_cast<std::size_t>(predicted[i])] = 1.0;
  return s;
}

// ------------------------------------------------------------------ report

struct ReportMetadata {
  std::string model;
  std::string dataset;
  std::optional<std::uint64_t> split_seed;

  friend bool operator==(const ReportMetadata&, const ReportMetadata&) = default;
};

struct EvaluationReport {
  ReportMetadata metadata;
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  AveragedMetrics macro, micro, weighted;
  std::vector<ClassMetrics> per_class;
  std::optional<AucResult> auc;  // absent when no usable scores
  bool auc_from_labels = false;  // AUC computed from one-hot predictions
  std::vector<std::string> flags;
};

/// `scores` (N x K) and `actual` are optional; pass both or neither.
inline EvaluationReport build_report(const ConfusionMatrix& m, std::span<const double> scores,
                                     std::span<const int> actual, const ReportMetadata& metadata,
                                     bool scores_are_one_hot = false) {
  EvaluationReport r;
  r.metadata = metadata;
  r.confusion = m;
  r.macro = classification_metrics(m, Averaging::macro);
  r.micro = classification_metrics(m, Averaging::micro);
  r.weighted = classification_metrics(m, Averaging::weighted);
  r.accuracy = r.weighted.accuracy;
  r.per_class = per_class_metrics(m);
  if (r.weighted.zero_division || r.macro.zero_division) r.flags.push_back("zero_division");
  if (!actual.empty()) {
    if (actual.size() != m.total())
      throw DimensionError("report has " + std::to_string(actual.size()) + " labels for a matrix of " +
                           std::to_string(m.total()));
    try {
      r.auc = roc_auc_ovr(scores, actual, m.classes());
      if (!r.auc->skipped_classes.empty()) r.flags.push_back("auc_skipped_classes");
    } catch (const MetricError&) {
      r.flags.push_back("auc_undefined");
    }
    r.auc_from_labels = scores_are_one_hot;
    if (scores_are_one_hot) r.flags.push_back("auc_degenerate_one_hot");
  }
  return r;
}

namespace detail {

inline nlohmann::ordered_json averaged_json(const AveragedMetrics& a) {
  nlohmann::ordered_json j;
  j["precision"] = a.precision;
  j["recall"] = a.recall;
  j["f1"] = a.f1;
  j["zero_division"] = a.zero_division;
  return j;
}

inline AveragedMetrics averaged_from_json(const nlohmann::json& j, double accuracy) {
  AveragedMetrics a;
  a.accuracy = accuracy;
  a.precision = j.at("precision").get<double>();
  a.recall = j.at("recall").get<double>();
  a.f1 = j.at("f1").get<double>();
  a.zero_division = j.at("zero_division").get<bool>();
  return a;
}

inline nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

/// Canonical key order; see README for the schema.
inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kVersion;
  j["metadata"]["model"] = r.metadata.model;
  j["metadata"]["dataset"] = r.metadata.dataset;
  j["metadata"]["split_seed"] =
      r.metadata.split_seed ? nlohmann::ordered_json(*r.metadata.split_seed) : nlohmann::ordered_json(nullptr);
  j["classes"] = r.confusion.classes();
  j["confusion_matrix"] = r.confusion.rows();
  j["accuracy"] = r.accuracy;
  j["default_averaging"] = "weighted";
  j["averages"]["macro"] = detail::averaged_json(r.macro);
  j["averages"]["micro"] = detail::averaged_json(r.micro);
  j["averages"]["weighted"] = detail::averaged_json(r.weighted);
  j["per_class"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    nlohmann::ordered_json e;
    e["class"] = c;
    e["support"] = m.support;
    e["precision"] = m.precision;
    e["recall"] = m.recall;
    e["f1"] = m.f1;
    e["precision_undefined"] = m.precision_undefined;
    e["recall_undefined"] = m.recall_undefined;
    e["f1_undefined"] = m.f1_undefined;
    j["per_class"].push_back(e);
  }
  if (r.auc) {
    j["auc"]["macro"] = r.auc->macro;
    j["auc"]["per_class"] = nlohmann::ordered_json::array();
    for (const auto& v : r.auc->per_class) j["auc"]["per_class"].push_back(detail::optional_number(v));
    j["auc"]["skipped_classes"] = r.auc->skipped_classes;
    j["auc"]["from_labels"] = r.auc_from_labels;
  } else {
    j["auc"] = nullptr;
  }
  j["flags"] = r.flags;
  return j;
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    const auto& meta = j.at("metadata");
    r.metadata.model = meta.at("model").get<std::string>();
    r.metadata.dataset = meta.at("dataset").get<std::string>();
    if (!meta.at("split_seed").is_null()) r.metadata.split_seed = meta.at("split_seed").get<std::uint64_t>();
    r.confusion = ConfusionMatrix::from_rows(j.at("confusion_matrix").get<std::vector<std::vector<std::uint64_t>>>());
    r.accuracy = j.at("accuracy").get<double>();
    r.macro = detail::averaged_from_json(j.at("averages").at("macro"), r.accuracy);
    r.micro = detail::averaged_from_json(j.at("averages").at("micro"), r.accuracy);
    r.weighted = detail::averaged_from_json(j.at("averages").at("weighted"), r.accuracy);
    for (const auto& e : j.at("per_class")) {
      ClassMetrics m;
      m.support = e.at("support").get<std::uint64_t>();
      m.precision = e.at("precision").get<double>();
      m.recall = e.at("recall").get<double>();
      m.f1 = e.at("f1").get<double>();
      m.precision_undefined = e.at("precision_undefined").get<bool>();
      m.recall_undefined = e.at("recall_undefined").get<bool>();
      m.f1_undefined = e.at("f1_undefined").get<bool>();
      r.per_class.push_back(m);
    }
    if (!j.at("auc").is_null()) {
      AucResult a;
      a.macro = j.at("auc").at("macro").get<double>();
      for (const auto& v : j.at("auc").at("per_class"))
        a.per_class.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      a.skipped_classes = j.at("auc").at("skipped_classes").get<std::vector<std::size_t>>();
      r.auc_from_labels = j.at("auc").at("from_labels").get<bool>();
      r.auc = a;
    }
    r.flags = j.at("flags").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("evaluation report: ") + e.what());
  }
}

inline void write_report(const EvaluationReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << to_json(r).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

/// `actual\predicted,0,1,...` header, then one row per actual class.
inline void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m) {
  out << "actual\\predicted";
  for (std::size_t p = 0; p < m.classes(); ++p) out << ',' << p;
  out << '\n';
  for (std::size_t a = 0; a < m.classes(); ++a) {
    out << a;
    for (std::size_t p = 0; p < m.classes(); ++p) out << ',' << m.at(a, p);
    out << '\n';
  }
}

inline void write_confusion_csv(const ConfusionMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_confusion_csv(out, m);
}

}  // namespace fnwl
