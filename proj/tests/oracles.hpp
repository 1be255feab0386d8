#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "coaplab/dataset.hpp"

namespace coaplab::testing {

// Exhaustive Gaussian log posterior computed from scratch.
inline std::array<double, 2> reference_posterior(const FeatureDataset& train, std::span<const double> x, double smoothing) {
  const std::size_t d = train.features();
  double max_var = 0;
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0;
    for (std::size_t i = 0; i < train.size(); ++i) mu += train.x(i, j);
    mu /= train.size();
    double v = 0;
    for (std::size_t i = 0; i < train.size(); ++i) v += std::pow(train.x(i, j) - mu, 2);
    max_var = std::max(max_var, v / train.size());
  }
  std::array<double, 2> out{};
  for (int c = 0; c < 2; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (train.y[i] == c) members.push_back(i);
    }
    double s = std::log(static_cast<double>(members.size()) / train.size());
    for (std::size_t j = 0; j < d; ++j) {
      double mu = 0;
      for (auto i : members) mu += train.x(i, j);
      mu /= members.size();
      double v = 0;
      for (auto i : members) v += std::pow(train.x(i, j) - mu, 2);
      v = v / members.size() + smoothing * max_var;
      s += -0.5 * std::log(2 * std::numbers::pi * v) - std::pow(x[j] - mu, 2) / (2 * v);
    }
    out[c] = s;
  }
  return out;
}

struct BruteSplit {
  int feature = -1;
  double threshold = 0;
  double impurity = INFINITY;
};

// Enumerates every (feature, midpoint) pair and scores it with explicit counting.
inline BruteSplit brute_force_split(const FeatureDataset& data) {
  BruteSplit best;
  const double n = static_cast<double>(data.size());
  auto g = [](double a, double b) {
    const double t = a + b;
    return t == 0 ? 0.0 : 1.0 - (a / t) * (a / t) - (b / t) * (b / t);
  };
  for (std::size_t f = 0; f < data.features(); ++f) {
    std::vector<double> values;
    for (std::size_t i = 0; i < data.size(); ++i) values.push_back(data.x(i, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double thr = values[k] + (values[k + 1] - values[k]) / 2;
      double l0 = 0, l1 = 0, r0 = 0, r1 = 0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const bool left = data.x(i, f) <= thr;
        if (data.y[i] == 1) {
          (left ? l1 : r1) += 1;
        } else {
          (left ? l0 : r0) += 1;
        }
      }
      const double imp = ((l0 + l1) * g(l0, l1) + (r0 + r1) * g(r0, r1)) / n;
      if (imp < best.impurity - 1e-12) best = {static_cast<int>(f), thr, imp};
    }
  }
  return best;
}

}  // namespace coaplab::testing
