#include "coaplab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "coaplab/error.hpp"
#include "coaplab/random.hpp"

namespace coaplab {

void FeatureDataset::validate() const {
  if (x.rows() != y.size()) throw DataError("feature rows and labels differ in count");
  for (int label : y) {
    if (label != 0 && label != 1) throw DataError("labels must be 0 or 1");
  }
}

bool FeatureDataset::has_both_classes() const {
  bool zero = false, one = false;
  for (int label : y) (label == 0 ? zero : one) = true;
  return zero && one;
}

FeatureDataset FeatureDataset::subset(std::span<const std::size_t> rows) const {
  FeatureDataset out;
  out.x = Matrix(0, x.cols());
  std::vector<double> data;
  data.reserve(rows.size() * x.cols());
  for (std::size_t r : rows) {
    const auto row = x.row(r);
    data.insert(data.end(), row.begin(), row.end());
    out.y.push_back(y[r]);
  }
  out.x = Matrix(rows.size(), x.cols(), std::move(data));
  return out;
}

SequenceDataset SequenceDataset::subset(std::span<const std::size_t> rows) const {
  SequenceDataset out;
  for (std::size_t r : rows) {
    out.sequences.push_back(sequences[r]);
    out.y.push_back(y[r]);
  }
  return out;
}

namespace {

std::map<int, std::vector<std::size_t>> by_class(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

}  // namespace

SplitIndices stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0 && test_fraction < 1)) throw DataError("test_fraction must lie in (0, 1)");
  Rng rng(seed);
  SplitIndices out;
  for (auto& [label, idx] : by_class(labels)) {
    if (idx.size() < 2) throw DataError("class " + std::to_string(label) + " has fewer than 2 samples");
    rng.shuffle(idx);
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::pair<FeatureDataset, FeatureDataset> train_test_split(const FeatureDataset& data, double test_fraction,
                                                           std::uint64_t seed) {
  data.validate();
  const SplitIndices split = stratified_split(data.y, test_fraction, seed);
  return {data.subset(split.train), data.subset(split.test)};
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw DataError("need at least 2 folds");
  Rng rng(seed);
  std::vector<std::size_t> fold(labels.size(), 0);
  for (auto& [label, idx] : by_class(labels)) {
    rng.shuffle(idx);
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = k % folds;
  }
  return fold;
}

}  // namespace coaplab
