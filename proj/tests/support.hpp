#pragma once

#include <array>
#include <cstdint>

#include "coaplab/dataset.hpp"
#include "coaplab/random.hpp"

namespace coaplab::testing {

/// 42 uniform columns; the label depends only on the sum of the three planted ones.
inline FeatureDataset planted_dataset(std::size_t rows, std::uint64_t seed, std::array<std::size_t, 3> planted) {
  Rng rng(seed);
  FeatureDataset d;
  d.x = Matrix(rows, 42, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < 42; ++j) d.x(i, j) = rng.uniform01();
    const double s = d.x(i, planted[0]) + d.x(i, planted[1]) + d.x(i, planted[2]);
    d.y.push_back(s > 1.5 ? 1 : 0);
  }
  return d;
}

}  // namespace coaplab::testing
