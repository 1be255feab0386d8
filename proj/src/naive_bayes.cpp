#include <algorithm>
#include <cmath>
#include <numbers>

#include "coaplab/classifiers.hpp"
#include "coaplab/error.hpp"

namespace coaplab {

GaussianNbModel nb_fit(const FeatureDataset& train, double var_smoothing) {
  train.validate();
  if (!train.has_both_classes()) throw DataError("naive Bayes needs both classes");
  const std::size_t d = train.features();
  GaussianNbModel m;
  std::array<std::size_t, 2> count{};
  for (int c = 0; c < 2; ++c) {
    m.mean[c].assign(d, 0.0);
    m.variance[c].assign(d, 0.0);
  }
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int c = train.y[i];
    ++count[c];
    const auto row = train.x.row(i);
    for (std::size_t j = 0; j < d; ++j) m.mean[c][j] += row[j];
  }
  for (int c = 0; c < 2; ++c) {
    for (auto& v : m.mean[c]) v /= static_cast<double>(count[c]);
  }
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int c = train.y[i];
    const auto row = train.x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - m.mean[c][j];
      m.variance[c][j] += diff * diff;
    }
  }
  for (int c = 0; c < 2; ++c) {
    for (auto& v : m.variance[c]) v /= static_cast<double>(count[c]);
  }

  // Largest per-feature variance over the whole training set sets the smoothing scale.
  double max_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) mean += train.x(i, j);
    mean /= static_cast<double>(train.size());
    double var = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) var += (train.x(i, j) - mean) * (train.x(i, j) - mean);
    max_var = std::max(max_var, var / static_cast<double>(train.size()));
  }
  m.epsilon = std::max(var_smoothing * max_var, 1e-300);
  for (int c = 0; c < 2; ++c) {
    for (auto& v : m.variance[c]) v += m.epsilon;
    m.prior[c] = static_cast<double>(count[c]) / static_cast<double>(train.size());
  }
  return m;
}

std::array<double, 2> nb_log_posterior(const GaussianNbModel& m, std::span<const double> x) {
  if (x.size() != m.mean[0].size()) throw DataError("sample width does not match the model");
  std::array<double, 2> score{};
  for (int c = 0; c < 2; ++c) {
    double s = std::log(m.prior[c]);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double var = m.variance[c][j];
      const double diff = x[j] - m.mean[c][j];
      s -= 0.5 * std::log(2.0 * std::numbers::pi * var) + diff * diff / (2.0 * var);
    }
    score[c] = s;
  }
  return score;
}

int nb_predict(const GaussianNbModel& m, std::span<const double> x) {
  const auto score = nb_log_posterior(m, x);
  return score[1] > score[0] ? 1 : 0;
}

nlohmann::json to_json(const GaussianNbModel& m) {
  return {{"model", "naive_bayes"},
          {"prior", m.prior},
          {"mean", {m.mean[0], m.mean[1]}},
          {"variance", {m.variance[0], m.variance[1]}},
          {"epsilon", m.epsilon}};
}

GaussianNbModel nb_from_json(const nlohmann::json& doc) {
  GaussianNbModel m;
  m.prior = doc.at("prior").get<std::array<double, 2>>();
  for (int c = 0; c < 2; ++c) {
    m.mean[c] = doc.at("mean").at(c).get<std::vector<double>>();
    m.variance[c] = doc.at("variance").at(c).get<std::vector<double>>();
  }
  m.epsilon = doc.at("epsilon").get<double>();
  return m;
}

}  // namespace coaplab
