// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fnwl/error.hpp"
#include "fnwl/preprocessing/windows.hpp"

namespace fnwl {

/// Row-major N x D feature matrix with labels.
struct FlatDataset {
  std::size_t features = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t rows() const { return features == 0 ? 0 : x.size() / features; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * features, features);
  }

  void validate() const {
    if (features == 0) throw DimensionError("flat dataset has zero features");
    if (x.size() % features != 0 || x.size() / features != y.size())
      throw DimensionError("flat dataset has " + std::to_string(x.size()) + " values and " +
                           std::to_string(y.size()) + " labels for " + std::to_string(features) + " features");
  }

  /// Windows flattened channel-major: feature c * L + t.
  static FlatDataset from_windows(const WindowDataset& d) {
    return FlatDataset{d.window_size(), d.values, d.labels};
  }
};

/// Labels plus an N x K row-major score matrix.
struct BaselinePrediction {
  std::size_t classes = 0;
  std::vector<int> labels;
  std::vector<double> scores;

  std::span<const double> score_row(std::size_t i) const {
    return std::span<const double>(scores).subspan(i * classes, classes);
  }
};

namespace detail {

inline void check_training_set(const FlatDataset& train, std::size_t classes, bool every_class, const char* who) {
  train.validate();
  if (train.rows() == 0) throw FitError(std::string(who) + ": training set is empty");
  std::vector<std::size_t> count(classes, 0);
  for (int y : train.y) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw LabelError(std::string(who) + ": training label " + std::to_string(y) + " outside 0.." +
                       std::to_string(classes - 1));
    ++count[static_cast<std::size_t>(y)];
  }
  if (every_class)
    for (std::size_t k = 0; k < classes; ++k)
      if (count[k] == 0) throw FitError(std::string(who) + ": class " + std::to_string(k) + " has no training rows");
}

inline void check_test_rows(std::span<const double> test_x, std::size_t features) {
  if (test_x.size() % features != 0)
    throw DimensionError("test matrix of " + std::to_string(test_x.size()) + " values is not a multiple of " +
                         std::to_string(features) + " features");
}

inline int argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return static_cast<int>(best);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// ------------------------------------------------------------- Gaussian NB

/// Per-class feature means and variances (population, plus the smoothing
/// term 1e-9 times the largest feature variance over all training rows).
/// Scores are normalised log-posteriors.
inline BaselinePrediction gaussian_nb_fit_predict(const FlatDataset& train, std::span<const double> test_x,
                                                  std::size_t classes = 4) {
  detail::check_training_set(train, classes, true, "naive Bayes");
  detail::check_test_rows(test_x, train.features);
  const std::size_t d = train.features, n = train.rows();

  std::vector<double> all_mean(d, 0.0), all_var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < d; ++f) all_mean[f] += train.row(i)[f];
  for (double& m : all_mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < d; ++f) {
      const double dv = train.row(i)[f] - all_mean[f];
      all_var[f] += dv * dv;
    }
  double max_var = 0.0;
  for (double& v : all_var) max_var = std::max(max_var, v /= static_cast<double>(n));
  const double smoothing = 1e-9 * (max_var > 0.0 ? max_var : 1.0);

  std::vector<double> mean(classes * d, 0.0), var(classes * d, 0.0), log_prior(classes);
  std::vector<std::size_t> count(classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(train.y[i]);
    ++count[k];
    for (std::size_t f = 0; f < d; ++f) mean[k * d + f] += train.row(i)[f];
  }
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t f = 0; f < d; ++f) mean[k * d + f] /= static_cast<double>(count[k]);
    log_prior[k] = std::log(static_cast<double>(count[k]) / static_cast<double>(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(train.y[i]);
    for (std::size_t f = 0; f < d; ++f) {
      const double dv = train.row(i)[f] - mean[k * d + f];
      var[k * d + f] += dv * dv;
    }
  }
  std::vector<double> log_norm(classes, 0.0);
  for (std::size_t k = 0; k < classes; ++k)
    for (std::size_t f = 0; f < d; ++f) {
      double& v = var[k * d + f];
      v = v / static_cast<double>(count[k]) + smoothing;
      log_norm[k] += std::log(2.0 * std::numbers::pi * v);
    }

  BaselinePrediction out;
  out.classes = classes;
  const std::size_t m = test_x.size() / d;
  out.scores.resize(m * classes);
  for (std::size_t i = 0; i < m; ++i) {
    const auto x = test_x.subspan(i * d, d);
    auto s = std::span<double>(out.scores).subspan(i * classes, classes);
    for (std::size_t k = 0; k < classes; ++k) {
      double quad = 0.0;
      for (std::size_t f = 0; f < d; ++f) {
        const double dv = x[f] - mean[k * d + f];
        quad += dv * dv / var[k * d + f];
      }
      s[k] = log_prior[k] - 0.5 * (log_norm[k] + quad);
    }
    const double top = *std::max_element(s.begin(), s.end());
    double total = 0.0;
    for (double v : s) total += std::exp(v - top);
    const double log_evidence = top + std::log(total);
    for (double& v : s) v -= log_evidence;
    out.labels.push_back(detail::argmax_lowest(s));
  }
  return out;
}

// ------------------------------------------------------- nearest centroid

/// Scores are negative Euclidean distances to the class means.
inline BaselinePrediction nearest_centroid_fit_predict(const FlatDataset& train, std::span<const double> test_x,
                                                       std::size_t classes = 4) {
  detail::check_training_set(train, classes, true, "nearest centroid");
  detail::check_test_rows(test_x, train.features);
  const std::size_t d = train.features;
  std::vector<double> centroid(classes * d, 0.0);
  std::vector<std::size_t> count(classes, 0);
  for (std::size_t i = 0; i < train.rows(); ++i) {
    const auto k = static_cast<std::size_t>(train.y[i]);
    ++count[k];
    for (std::size_t f = 0; f < d; ++f) centroid[k * d + f] += train.row(i)[f];
  }
  for (std::size_t k = 0; k < classes; ++k)
    for (std::size_t f = 0; f < d; ++f) centroid[k * d + f] /= static_cast<double>(count[k]);

  BaselinePrediction out;
  out.classes = classes;
  const std::size_t m = test_x.size() / d;
  out.scores.resize(m * classes);
  for (std::size_t i = 0; i < m; ++i) {
    const auto x = test_x.subspan(i * d, d);
    auto s = std::span<double>(out.scores).subspan(i * classes, classes);
    for (std::size_t k = 0; k < classes; ++k)
      s[k] = -std::sqrt(detail::squared_distance(x, std::span<const double>(centroid).subspan(k * d, d)));
    out.labels.push_back(detail::argmax_lowest(s));
  }
  return out;
}

// ---------------------------------------------------------- decision tree

/// CART with Gini impurity. Rows with x[feature] <= threshold go left.
class DecisionTree {
 public:
  struct Node {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t left = 0, right = 0;
    std::vector<double> frequencies;  // class frequencies of the training rows reaching the node
    int label = 0;
  };

  static DecisionTree fit(const FlatDataset& train, std::size_t classes = 4,
                          std::optional<std::size_t> max_depth = std::nullopt) {
    detail::check_training_set(train, classes, false, "decision tree");
    DecisionTree tree;
    tree.classes_ = classes;
    tree.features_ = train.features;
    std::vector<std::size_t> rows(train.rows());
    std::iota(rows.begin(), rows.end(), 0);
    tree.grow(train, rows, 0, max_depth);
    return tree;
  }

  BaselinePrediction predict(std::span<const double> test_x) const {
    detail::check_test_rows(test_x, features_);
    BaselinePrediction out;
    out.classes = classes_;
    const std::size_t m = test_x.size() / features_;
    for (std::size_t i = 0; i < m; ++i) {
      const Node& leaf = leaf_for(test_x.subspan(i * features_, features_));
      out.labels.push_back(leaf.label);
      out.scores.insert(out.scores.end(), leaf.frequencies.begin(), leaf.frequencies.end());
    }
    return out;
  }

  const std::vector<Node>& nodes() const { return nodes_; }

  std::size_t depth() const { return depth_of(0); }

 private:
  using Wide = unsigned __int128;

  // Sum over classes of count^2 / n as an exact fraction.
  struct Purity {
    Wide numerator;
    Wide denominator;
    bool operator>(const Purity& o) const { return numerator * o.denominator > o.numerator * denominator; }
  };

  static std::uint64_t sum_squares(std::span<const std::size_t> counts) {
    std::uint64_t s = 0;
    for (std::size_t c : counts) s += static_cast<std::uint64_t>(c) * c;
    return s;
  }

  std::size_t grow(const FlatDataset& train, std::vector<std::size_t>& rows, std::size_t depth,
                   std::optional<std::size_t> max_depth) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    std::vector<std::size_t> counts(classes_, 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(train.y[r])];
    {
      Node& node = nodes_[id];
      node.frequencies.resize(classes_);
      for (std::size_t k = 0; k < classes_; ++k)
        node.frequencies[k] = static_cast<double>(counts[k]) / static_cast<double>(rows.size());
      node.label = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }
    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    if (pure || (max_depth && depth >= *max_depth)) return id;

    // Best split maximises children purity; scanning features then thresholds
    // in ascending order with strict improvement keeps the lowest on ties.
    const Purity parent{sum_squares(counts), rows.size()};
    std::optional<Purity> best;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    std::vector<std::size_t> order(rows);
    std::vector<std::size_t> left(classes_), right(classes_);
    for (std::size_t f = 0; f < train.features; ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return train.row(a)[f] < train.row(b)[f]; });
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const auto k = static_cast<std::size_t>(train.y[order[i]]);
        ++left[k];
        --right[k];
        const double lo = train.row(order[i])[f], hi = train.row(order[i + 1])[f];
        if (!(lo < hi)) continue;
        const std::size_t n_left = i + 1, n_right = order.size() - n_left;
        const Purity split{Wide(sum_squares(left)) * n_right + Wide(sum_squares(right)) * n_left,
                           Wide(n_left) * n_right};
        if (!(split > parent)) continue;
        if (!best || split > *best) {
          best = split;
          best_feature = f;
          best_threshold = midpoint(lo, hi);
        }
      }
    }
    if (!best) return id;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows)
      (train.row(r)[best_feature] <= best_threshold ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const std::size_t l = grow(train, left_rows, depth + 1, max_depth);
    const std::size_t r = grow(train, right_rows, depth + 1, max_depth);
    Node& node = nodes_[id];
    node.leaf = false;
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Rounded midpoint that still separates lo from hi.
  static double midpoint(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
  }

  const Node& leaf_for(std::span<const double> x) const {
    std::size_t at = 0;
    while (!nodes_[at].leaf) at = x[nodes_[at].feature] <= nodes_[at].threshold ? nodes_[at].left : nodes_[at].right;
    return nodes_[at];
  }

  std::size_t depth_of(std::size_t at) const {
    if (nodes_[at].leaf) return 0;
    return 1 + std::max(depth_of(nodes_[at].left), depth_of(nodes_[at].right));
  }

  std::size_t classes_ = 0;
  std::size_t features_ = 0;
  std::vector<Node> nodes_;
};

inline BaselinePrediction decision_tree_fit_predict(const FlatDataset& train, std::span<const double> test_x,
                                                    std::size_t classes = 4,
                                                    std::optional<std::size_t> max_depth = std::nullopt) {
  return DecisionTree::fit(train, classes, max_depth).predict(test_x);
}

// -------------------------------------------------------------------- k-NN

/// Euclidean k nearest neighbours; distance ties go to the lower training
/// index. Vote ties go to the tied class whose member ranks nearest. Scores
/// are vote fractions.
inline BaselinePrediction knn_fit_predict(const FlatDataset& train, std::span<const double> test_x,
                                          std::size_t k = 5, std::size_t classes = 4) {
  detail::check_training_set(train, classes, false, "k-NN");
  detail::check_test_rows(test_x, train.features);
  const std::size_t n = train.rows(), d = train.features;
  if (k < 1 || k > n)
    throw ParameterError("k-NN needs 1 <= k <= " + std::to_string(n) + " training rows, got k = " + std::to_string(k));

  BaselinePrediction out;
  out.classes = classes;
  const std::size_t m = test_x.size() / d;
  std::vector<std::pair<double, std::size_t>> dist(n);
  std::vector<std::size_t> votes(classes);
  for (std::size_t i = 0; i < m; ++i) {
    const auto x = test_x.subspan(i * d, d);
    for (std::size_t j = 0; j < n; ++j) dist[j] = {detail::squared_distance(x, train.row(j)), j};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t j = 0; j < k; ++j) ++votes[static_cast<std::size_t>(train.y[dist[j].second])];
    const std::size_t top = *std::max_element(votes.begin(), votes.end());
    int label = -1;
    for (std::size_t j = 0; j < k && label < 0; ++j) {
      const int y = train.y[dist[j].second];
      if (votes[static_cast<std::size_t>(y)] == top) label = y;
    }
    out.labels.push_back(label);
    for (std::size_t c = 0; c < classes; ++c)
      out.scores.push_back(static_cast<double>(votes[c]) / static_cast<double>(k));
  }
  return out;
}

// --------------------------------------------------------------- dispatch

enum class BaselineKind { naive_bayes, nearest_centroid, decision_tree, knn };

inline std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::naive_bayes: return "nb";
    case BaselineKind::nearest_centroid: return "centroid";
    case BaselineKind::decision_tree: return "tree";
    case BaselineKind::knn: return "knn";
  }
  return "?";
}

inline BaselineKind baseline_kind_from_string(const std::string& name) {
  for (auto kind : {BaselineKind::naive_bayes, BaselineKind::nearest_centroid, BaselineKind::decision_tree,
                    BaselineKind::knn})
    if (to_string(kind) == name) return kind;
  throw ConfigError("unknown baseline '" + name + "' (expected nb, centroid, tree or knn)");
}

struct BaselineOptions {
  std::size_t classes = 4;
  std::size_t k = 5;
  std::optional<std::size_t> max_depth;
  bool standardize = false;
};

/// Per-feature z-scoring with training statistics; constant features pass
/// through unchanged.
inline void standardize_features(FlatDataset& train, std::vector<double>& test_x) {
  const std::size_t d = train.features, n = train.rows();
  for (std::size_t f = 0; f < d; ++f) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += train.x[i * d + f];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sq += (train.x[i * d + f] - mean) * (train.x[i * d + f] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    if (!(sd > 0.0)) continue;
    for (std::size_t i = 0; i < n; ++i) train.x[i * d + f] = (train.x[i * d + f] - mean) / sd;
    for (std::size_t i = f; i < test_x.size(); i += d) test_x[i] = (test_x[i] - mean) / sd;
  }
}

inline BaselinePrediction run_baseline(BaselineKind kind, FlatDataset train, std::vector<double> test_x,
                                       const BaselineOptions& opt = {}) {
  train.validate();
  detail::check_test_rows(test_x, train.features);
  if (opt.standardize) standardize_features(train, test_x);
  switch (kind) {
    case BaselineKind::naive_bayes: return gaussian_nb_fit_predict(train, test_x, opt.classes);
    case BaselineKind::nearest_centroid: return nearest_centroid_fit_predict(train, test_x, opt.classes);
    case BaselineKind::decision_tree: return decision_tree_fit_predict(train, test_x, opt.classes, opt.max_depth);
    case BaselineKind::knn: return knn_fit_predict(train, test_x, opt.k, opt.classes);
  }
  throw ConfigError("unknown baseline kind");
}

}  // namespace fnwl
