#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coaplab/matrix.hpp"

namespace coaplab {

/// Flat samples (one row each) with binary labels, 0 benign and 1 malicious.
struct FeatureDataset {
  Matrix x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::size_t features() const { return x.cols(); }
  /// Throws DataError when |x| != |y| or a label is not 0/1.
  void validate() const;
  bool has_both_classes() const;
  FeatureDataset subset(std::span<const std::size_t> rows) const;
};

/// Uniform-length sequences (windows x n x features) for recurrent models.
struct SequenceDataset {
  std::vector<Matrix> sequences;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  SequenceDataset subset(std::span<const std::size_t> rows) const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split: each class contributes round(count * test_fraction) test samples, at least one
/// per side. Deterministic under seed; throws DataError for a class with fewer than 2 samples.
SplitIndices stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed);

std::pair<FeatureDataset, FeatureDataset> train_test_split(const FeatureDataset& data, double test_fraction,
                                                           std::uint64_t seed);

/// Stratified fold assignment in [0, folds); deterministic under seed.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed);

}  // namespace coaplab
