#include <algorithm>
#include <cmath>
#include <numeric>

#include "coaplab/classifiers.hpp"
#include "coaplab/error.hpp"

namespace coaplab {

double gini(std::int64_t benign, std::int64_t malicious) {
  const double n = static_cast<double>(benign + malicious);
  if (n == 0) return 0.0;
  const double p0 = benign / n;
  const double p1 = malicious / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

SplitChoice best_split(const FeatureDataset& data, std::span<const std::size_t> rows,
                       std::span<const std::size_t> features) {
  SplitChoice best;
  best.impurity = INFINITY;
  const auto n = static_cast<std::int64_t>(rows.size());
  std::int64_t total1 = 0;
  for (std::size_t r : rows) total1 += data.y[r];
  const std::int64_t total0 = n - total1;

  std::vector<std::pair<double, int>> column(rows.size());
  for (std::size_t f : features) {
    for (std::size_t k = 0; k < rows.size(); ++k) column[k] = {data.x(rows[k], f), data.y[rows[k]]};
    std::sort(column.begin(), column.end());
    if (column.front().first == column.back().first) continue;
    std::int64_t left0 = 0, left1 = 0;
    for (std::size_t k = 0; k + 1 < column.size(); ++k) {
      (column[k].second == 1 ? left1 : left0)++;
      if (column[k].first == column[k + 1].first) continue;
      const std::int64_t nl = left0 + left1;
      const std::int64_t nr = n - nl;
      const double impurity =
          (static_cast<double>(nl) * gini(left0, left1) + static_cast<double>(nr) * gini(total0 - left0, total1 - left1)) /
          static_cast<double>(n);
      // Ties keep the earlier candidate: lower feature index, then lower threshold.
      if (impurity < best.impurity - 1e-12) {
        best.feature = static_cast<int>(f);
        best.threshold = column[k].first + (column[k + 1].first - column[k].first) / 2.0;
        best.impurity = impurity;
      }
    }
  }
  return best;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const FeatureDataset& data, const TreeParams& params, Rng* rng)
      : data_(data), params_(params), rng_(rng), all_features_(data.features()) {
    std::iota(all_features_.begin(), all_features_.end(), 0);
  }

  DecisionTreeModel build(std::vector<std::size_t> rows) {
    model_.params = params_;
    grow(std::move(rows), 0);
    return std::move(model_);
  }

 private:
  std::vector<std::size_t> candidate_features() {
    const std::size_t k = params_.features_per_split;
    if (k == 0 || k >= all_features_.size() || rng_ == nullptr) return all_features_;
    // Partial Fisher-Yates, then sort so the tie-break stays "lowest feature index".
    std::vector<std::size_t> pool = all_features_;
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(rng_->uniform_int(static_cast<std::int64_t>(i),
                                                                static_cast<std::int64_t>(pool.size() - 1)));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    const int id = static_cast<int>(model_.nodes.size());
    model_.nodes.emplace_back();
    std::int64_t malicious = 0;
    for (std::size_t r : rows) malicious += data_.y[r];
    const auto n = static_cast<std::int64_t>(rows.size());
    {
      TreeNode& node = model_.nodes[id];
      node.samples = rows.size();
      node.p_malicious = n == 0 ? 0.0 : static_cast<double>(malicious) / static_cast<double>(n);
      node.label = 2 * malicious > n ? 1 : 0;
    }
    const bool pure = malicious == 0 || malicious == n;
    if (pure || depth >= params_.max_depth || rows.size() < params_.min_samples_split) return id;

    const SplitChoice split = best_split(data_, rows, candidate_features());
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (data_.x(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = model_.nodes[id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const FeatureDataset& data_;
  TreeParams params_;
  Rng* rng_;
  std::vector<std::size_t> all_features_;
  DecisionTreeModel model_;
};

std::size_t depth_below(const DecisionTreeModel& m, int id) {
  const TreeNode& n = m.nodes[id];
  if (n.feature < 0) return 0;
  return 1 + std::max(depth_below(m, n.left), depth_below(m, n.right));
}

}  // namespace

std::size_t DecisionTreeModel::depth() const { return nodes.empty() ? 0 : depth_below(*this, 0); }

DecisionTreeModel tree_fit(const FeatureDataset& train, std::span<const std::size_t> rows, const TreeParams& params,
                           Rng* rng) {
  train.validate();
  if (rows.empty()) throw DataError("cannot fit a tree on no samples");
  return TreeBuilder(train, params, rng).build({rows.begin(), rows.end()});
}

DecisionTreeModel tree_fit(const FeatureDataset& train, const TreeParams& params) {
  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), 0);
  return tree_fit(train, rows, params, nullptr);
}

int tree_predict(const DecisionTreeModel& m, std::span<const double> x) {
  int id = 0;
  while (m.nodes[id].feature >= 0) {
    const TreeNode& n = m.nodes[id];
    id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return m.nodes[id].label;
}

int majority_vote(std::span<const int> votes) {
  std::size_t malicious = 0;
  for (int v : votes) malicious += v == 1 ? 1 : 0;
  return 2 * malicious > votes.size() ? 1 : 0;
}

RandomForestModel forest_fit(const FeatureDataset& train, const ForestParams& params) {
  train.validate();
  if (params.n_trees == 0) throw DataError("a forest needs at least one tree");
  RandomForestModel m;
  m.params = params;
  m.features_per_split = params.features_per_split != 0
                             ? params.features_per_split
                             : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(double(train.features()))));
  TreeParams tree = params.tree;
  tree.features_per_split = m.features_per_split;
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    const std::uint64_t seed = mix_seed(params.seed, t);
    Rng rng(seed);
    std::vector<std::size_t> rows(train.size());
    if (params.bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(train.size() - 1)));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    m.trees.push_back(tree_fit(train, rows, tree, &rng));
    m.tree_seeds.push_back(seed);
  }
  return m;
}

int forest_predict(const RandomForestModel& m, std::span<const double> x) {
  std::vector<int> votes;
  votes.reserve(m.trees.size());
  for (const auto& t : m.trees) votes.push_back(tree_predict(t, x));
  return majority_vote(votes);
}

nlohmann::json to_json(const DecisionTreeModel& m) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : m.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"label", n.label},
                     {"p_malicious", n.p_malicious},
                     {"samples", n.samples}});
  }
  return {{"model", "decision_tree"},
          {"max_depth", m.params.max_depth},
          {"min_samples_split", m.params.min_samples_split},
          {"features_per_split", m.params.features_per_split},
          {"nodes", nodes}};
}

DecisionTreeModel tree_from_json(const nlohmann::json& doc) {
  DecisionTreeModel m;
  m.params.max_depth = doc.at("max_depth").get<std::size_t>();
  m.params.min_samples_split = doc.at("min_samples_split").get<std::size_t>();
  m.params.features_per_split = doc.at("features_per_split").get<std::size_t>();
  for (const auto& n : doc.at("nodes")) {
    m.nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(), n.at("left").get<int>(),
                       n.at("right").get<int>(), n.at("label").get<int>(), n.at("p_malicious").get<double>(),
                       n.at("samples").get<std::size_t>()});
  }
  return m;
}

nlohmann::json to_json(const RandomForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) trees.push_back(to_json(t));
  return {{"model", "random_forest"},
          {"n_trees", m.params.n_trees},
          {"bootstrap", m.params.bootstrap},
          {"seed", m.params.seed},
          {"features_per_split", m.features_per_split},
          {"tree_seeds", m.tree_seeds},
          {"trees", trees}};
}

RandomForestModel forest_from_json(const nlohmann::json& doc) {
  RandomForestModel m;
  m.params.n_trees = doc.at("n_trees").get<std::size_t>();
  m.params.bootstrap = doc.at("bootstrap").get<bool>();
  m.params.seed = doc.at("seed").get<std::uint64_t>();
  m.features_per_split = doc.at("features_per_split").get<std::size_t>();
  m.params.features_per_split = m.features_per_split;
  m.tree_seeds = doc.at("tree_seeds").get<std::vector<std::uint64_t>>();
  for (const auto& t : doc.at("trees")) m.trees.push_back(tree_from_json(t));
  return m;
}

}  // namespace coaplab
