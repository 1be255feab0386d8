#include <cmath>

#include "coaplab/classifiers.hpp"
#include "coaplab/error.hpp"

namespace coaplab {

namespace {
double ratio(std::int64_t num, std::int64_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }
}  // namespace

double ConfusionMatrix::accuracy() const { return ratio(tp + tn, total()); }
double ConfusionMatrix::precision() const { return ratio(tp, tp + fp); }
double ConfusionMatrix::recall() const { return ratio(tp, tp + fn); }

double ConfusionMatrix::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth == 1) {
    (predicted == 1 ? tp : fn)++;
  } else {
    (predicted == 1 ? fp : tn)++;
  }
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw DataError("prediction count does not match labels");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

double accuracy_percent(const ConfusionMatrix& cm) { return std::round(cm.accuracy() * 10000.0) / 100.0; }

nlohmann::json to_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

}  // namespace coaplab
