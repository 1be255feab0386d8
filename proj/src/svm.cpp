#include <algorithm>
#include <cmath>
#include <numeric>

#include "coaplab/classifiers.hpp"
#include "coaplab/error.hpp"

namespace coaplab {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_finite(const LinearSvmModel& m) {
  if (!std::isfinite(m.bias)) throw DivergenceError("SVM bias is not finite");
  for (double w : m.weights) {
    if (!std::isfinite(w)) throw DivergenceError("SVM weights are not finite");
  }
}

}  // namespace

double svm_decision(const LinearSvmModel& m, std::span<const double> x) {
  if (x.size() != m.weights.size()) throw DataError("sample width does not match the model");
  return dot(m.weights, x) + m.bias;
}

int svm_predict(const LinearSvmModel& m, std::span<const double> x) { return svm_decision(m, x) > 0 ? 1 : 0; }

double svm_objective(const LinearSvmModel& m, const FeatureDataset& data) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double y = data.y[i] == 1 ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * svm_decision(m, data.x.row(i)));
  }
  const double norm2 = dot(m.weights, m.weights) + m.bias * m.bias;
  return m.lambda / 2.0 * norm2 + hinge / static_cast<double>(data.size());
}

LinearSvmModel svm_fit(const FeatureDataset& train, const SvmParams& params, SvmFitReport* report) {
  train.validate();
  if (train.size() == 0) throw DataError("cannot fit an SVM on no samples");
  if (!(params.lambda > 0)) throw DataError("lambda must be positive");
  const std::size_t d = train.features();

  // w[d] is the bias, paired with an implicit constant feature of 1.
  std::vector<double> w(d + 1, 0.0);
  std::vector<double> avg(d + 1, 0.0);
  double scale = 1.0;  // w is stored as scale * w so the shrink step is O(1)
  Rng rng(params.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  auto materialize = [&](const std::vector<double>& v, double s) {
    LinearSvmModel m;
    m.lambda = params.lambda;
    m.weights.resize(d);
    for (std::size_t j = 0; j < d; ++j) m.weights[j] = v[j] * s;
    m.bias = v[d] * s;
    return m;
  };

  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (params.lambda * static_cast<double>(t));
      const double y = train.y[i] == 1 ? 1.0 : -1.0;
      const auto x = train.x.row(i);
      const double margin = y * scale * (dot(std::span<const double>(w).first(d), x) + w[d]);
      // w <- (1 - eta lambda) w, which is exactly 0 at t = 1.
      const double shrink = 1.0 - eta * params.lambda;
      if (shrink == 0.0) {
        std::fill(w.begin(), w.end(), 0.0);
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (margin < 1.0) {
        const double step = eta * y / scale;
        for (std::size_t j = 0; j < d; ++j) w[j] += step * x[j];
        w[d] += step;
      }
      if (scale < 1e-9) {
        for (double& v : w) v *= scale;
        scale = 1.0;
      }
      // Running average of iterates: avg += (w - avg) / t.
      const double inv_t = 1.0 / static_cast<double>(t);
      for (std::size_t j = 0; j <= d; ++j) avg[j] += (scale * w[j] - avg[j]) * inv_t;
    }
    if (report != nullptr) {
      report->averaged_objective.push_back(svm_objective(materialize(avg, 1.0), train));
      report->last_objective.push_back(svm_objective(materialize(w, scale), train));
    }
  }
  LinearSvmModel model = params.average ? materialize(avg, 1.0) : materialize(w, scale);
  check_finite(model);
  return model;
}

nlohmann::json to_json(const LinearSvmModel& m) {
  return {{"model", "svm"}, {"weights", m.weights}, {"bias", m.bias}, {"lambda", m.lambda}};
}

LinearSvmModel svm_from_json(const nlohmann::json& doc) {
  LinearSvmModel m;
  m.weights = doc.at("weights").get<std::vector<double>>();
  m.bias = doc.at("bias").get<double>();
  m.lambda = doc.at("lambda").get<double>();
  return m;
}

}  // namespace coaplab
