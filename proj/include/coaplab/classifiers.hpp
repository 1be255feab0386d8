#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coaplab/dataset.hpp"
#include "coaplab/random.hpp"

namespace coaplab {

// ---------------------------------------------------------------- metrics

/// Malicious is the positive class.
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  double accuracy() const;
  double precision() const;
  double recall() const;
  double f1() const;
  void add(int truth, int predicted);

  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted);
/// Percentage rounded to two decimals, e.g. 99.88.
double accuracy_percent(const ConfusionMatrix& cm);

// ---------------------------------------------------------- naive bayes

struct GaussianNbModel {
  std::array<double, 2> prior{};
  std::array<std::vector<double>, 2> mean;
  std::array<std::vector<double>, 2> variance;
  double epsilon = 0.0;
};

/// var_smoothing scales the largest feature variance into the additive epsilon.
GaussianNbModel nb_fit(const FeatureDataset& train, double var_smoothing = 1e-9);
std::array<double, 2> nb_log_posterior(const GaussianNbModel& m, std::span<const double> x);
/// Malicious only when its log posterior is strictly larger.
int nb_predict(const GaussianNbModel& m, std::span<const double> x);

// -------------------------------------------------------- decision tree

struct TreeParams {
  std::size_t max_depth = 12;
  std::size_t min_samples_split = 2;
  /// Features examined per split; 0 means all of them.
  std::size_t features_per_split = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
  double p_malicious = 0.0;
  std::size_t samples = 0;
};

struct DecisionTreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  TreeParams params;

  std::size_t depth() const;
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted Gini of the children
};

/// Exhaustive CART split over `features`; rows may repeat (bootstrap). feature == -1 when no split exists.
SplitChoice best_split(const FeatureDataset& data, std::span<const std::size_t> rows,
                       std::span<const std::size_t> features);

double gini(std::int64_t benign, std::int64_t malicious);

DecisionTreeModel tree_fit(const FeatureDataset& train, const TreeParams& params = {});
/// Fit on a row multiset, drawing per-split feature subsets from rng when features_per_split > 0.
DecisionTreeModel tree_fit(const FeatureDataset& train, std::span<const std::size_t> rows, const TreeParams& params,
                           Rng* rng);
int tree_predict(const DecisionTreeModel& m, std::span<const double> x);

// -------------------------------------------------------- random forest

struct ForestParams {
  std::size_t n_trees = 100;
  /// 0 selects floor(sqrt(d)).
  std::size_t features_per_split = 0;
  bool bootstrap = true;
  std::uint64_t seed = 7;
  TreeParams tree;
};

struct RandomForestModel {
  std::vector<DecisionTreeModel> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::size_t features_per_split = 0;
  ForestParams params;
};

RandomForestModel forest_fit(const FeatureDataset& train, const ForestParams& params = {});
int forest_predict(const RandomForestModel& m, std::span<const double> x);
/// Strict majority of malicious votes; ties are benign.
int majority_vote(std::span<const int> votes);

// ----------------------------------------------------------- linear svm

struct SvmParams {
  double lambda = 1e-4;
  std::size_t epochs = 20;
  std::uint64_t seed = 11;
  /// Return the running average of all iterates instead of the last one.
  bool average = false;
};

struct LinearSvmModel {
  std::vector<double> weights;
  double bias = 0.0;
  double lambda = 1e-4;
};

struct SvmFitReport {
  /// Objective at the running-average iterate, once per epoch.
  std::vector<double> averaged_objective;
  std::vector<double> last_objective;
};

/// Pegasos: per-sample subgradient steps with eta_t = 1 / (lambda t). The bias is trained as the
/// weight of a constant 1 feature and is regularised with the others.
LinearSvmModel svm_fit(const FeatureDataset& train, const SvmParams& params = {}, SvmFitReport* report = nullptr);
double svm_decision(const LinearSvmModel& m, std::span<const double> x);
/// sign(w.x + b) with 0 mapped to benign.
int svm_predict(const LinearSvmModel& m, std::span<const double> x);
/// lambda/2 (|w|^2 + b^2) + mean hinge loss.
double svm_objective(const LinearSvmModel& m, const FeatureDataset& data);

// ------------------------------------------------------------ evaluation

template <typename Predict>
ConfusionMatrix evaluate_with(const FeatureDataset& test, Predict&& predict) {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < test.size(); ++i) cm.add(test.y[i], predict(test.x.row(i)));
  return cm;
}

inline ConfusionMatrix evaluate(const GaussianNbModel& m, const FeatureDataset& test) {
  return evaluate_with(test, [&](auto x) { return nb_predict(m, x); });
}
inline ConfusionMatrix evaluate(const DecisionTreeModel& m, const FeatureDataset& test) {
  return evaluate_with(test, [&](auto x) { return tree_predict(m, x); });
}
inline ConfusionMatrix evaluate(const RandomForestModel& m, const FeatureDataset& test) {
  return evaluate_with(test, [&](auto x) { return forest_predict(m, x); });
}
inline ConfusionMatrix evaluate(const LinearSvmModel& m, const FeatureDataset& test) {
  return evaluate_with(test, [&](auto x) { return svm_predict(m, x); });
}

// ---------------------------------------------------------- persistence

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const GaussianNbModel& m);
nlohmann::json to_json(const DecisionTreeModel& m);
nlohmann::json to_json(const RandomForestModel& m);
nlohmann::json to_json(const LinearSvmModel& m);
GaussianNbModel nb_from_json(const nlohmann::json& doc);
DecisionTreeModel tree_from_json(const nlohmann::json& doc);
RandomForestModel forest_from_json(const nlohmann::json& doc);
LinearSvmModel svm_from_json(const nlohmann::json& doc);

}  // namespace coaplab
