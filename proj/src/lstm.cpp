#include "coaplab/lstm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "coaplab/error.hpp"
#include "coaplab/random.hpp"

namespace coaplab {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

bool all_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

LstmModel::LstmModel(std::size_t input, std::size_t hidden) : input_(input), hidden_(hidden) {
  if (input == 0 || hidden == 0) throw DataError("LSTM sizes must be positive");
  theta_.assign(param_count(), 0.0);
}

LstmModel lstm_init(std::size_t input, const LstmParams& params) {
  LstmModel m(input, params.hidden);
  m.set_skip_padding(params.skip_padding);
  Rng rng(params.seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(params.hidden));
  auto p = m.params();
  for (std::size_t i = 0; i < m.gate_bias(); ++i) p[i] = rng.uniform_real(-k, k);
  const std::size_t h = params.hidden;
  for (std::size_t j = 0; j < h; ++j) p[m.gate_bias() + h + j] = params.forget_bias;
  for (std::size_t j = 0; j < h; ++j) p[m.output_weights() + j] = rng.uniform_real(-k, k);
  return m;
}

std::size_t lstm_steps(const LstmModel& m, const Matrix& sequence) {
  std::size_t steps = sequence.rows();
  if (m.skip_padding()) {
    while (steps > 1 && all_zero(sequence.row(steps - 1))) --steps;
  }
  return steps;
}

double lstm_forward(const LstmModel& m, const Matrix& sequence, LstmTrace* trace) {
  const std::size_t h = m.hidden_size();
  const std::size_t in = m.input_size();
  if (sequence.rows() == 0) throw DataError("empty sequence");
  if (sequence.cols() != in) throw DataError("sequence width does not match the LSTM input size");
  const auto p = m.params();
  const double* wx = p.data() + m.input_weights();
  const double* wh = p.data() + m.recurrent_weights();
  const double* b = p.data() + m.gate_bias();

  const std::size_t steps = lstm_steps(m, sequence);
  std::vector<double> state(h, 0.0), cell(h, 0.0), z(4 * h);
  if (trace != nullptr) {
    trace->hidden = h;
    for (auto* v : {&trace->input_gate, &trace->forget_gate, &trace->output_gate, &trace->candidate, &trace->cell,
                    &trace->cell_tanh, &trace->state}) {
      v->assign(steps * h, 0.0);
    }
  }
  for (std::size_t t = 0; t < steps; ++t) {
    const auto x = sequence.row(t);
    std::copy(b, b + 4 * h, z.begin());
    if (!all_zero(x)) {
      for (std::size_t r = 0; r < 4 * h; ++r) {
        const double* w = wx + r * in;
        double s = 0.0;
        for (std::size_t c = 0; c < in; ++c) s += w[c] * x[c];
        z[r] += s;
      }
    }
    for (std::size_t r = 0; r < 4 * h; ++r) {
      const double* w = wh + r * h;
      double s = 0.0;
      for (std::size_t c = 0; c < h; ++c) s += w[c] * state[c];
      z[r] += s;
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = sigmoid(z[j]);
      const double fg = sigmoid(z[h + j]);
      const double og = sigmoid(z[2 * h + j]);
      const double g = std::tanh(z[3 * h + j]);
      cell[j] = fg * cell[j] + ig * g;
      const double ct = std::tanh(cell[j]);
      state[j] = og * ct;
      if (trace != nullptr) {
        const std::size_t at = t * h + j;
        trace->input_gate[at] = ig;
        trace->forget_gate[at] = fg;
        trace->output_gate[at] = og;
        trace->candidate[at] = g;
        trace->cell[at] = cell[j];
        trace->cell_tanh[at] = ct;
        trace->state[at] = state[j];
      }
    }
  }
  double logit = p[m.output_bias()];
  for (std::size_t j = 0; j < h; ++j) logit += p[m.output_weights() + j] * state[j];
  const double prob = sigmoid(logit);
  if (trace != nullptr) trace->probability = prob;
  return prob;
}

double lstm_loss_and_gradient(const LstmModel& m, const Matrix& sequence, int label, std::span<double> grad,
                              double weight) {
  if (grad.size() != m.param_count()) throw DataError("gradient buffer has the wrong size");
  LstmTrace tr;
  const double prob = lstm_forward(m, sequence, &tr);
  const double y = label == 1 ? 1.0 : 0.0;
  constexpr double kTiny = 1e-15;
  const double loss = -weight * (y * std::log(std::max(prob, kTiny)) + (1 - y) * std::log(std::max(1 - prob, kTiny)));

  const std::size_t h = m.hidden_size();
  const std::size_t in = m.input_size();
  const std::size_t steps = tr.state.size() / h;
  const auto p = m.params();
  const double* wh = p.data() + m.recurrent_weights();
  double* g_wx = grad.data() + m.input_weights();
  double* g_wh = grad.data() + m.recurrent_weights();
  double* g_b = grad.data() + m.gate_bias();
  double* g_v = grad.data() + m.output_weights();

  const double dlogit = weight * (prob - y);
  grad[m.output_bias()] += dlogit;
  std::vector<double> dh(h), dc(h, 0.0), dz(4 * h), dh_prev(h);
  for (std::size_t j = 0; j < h; ++j) {
    g_v[j] += dlogit * tr.state[(steps - 1) * h + j];
    dh[j] = dlogit * p[m.output_weights() + j];
  }
  for (std::size_t t = steps; t-- > 0;) {
    const std::size_t at = t * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = tr.input_gate[at + j];
      const double fg = tr.forget_gate[at + j];
      const double og = tr.output_gate[at + j];
      const double g = tr.candidate[at + j];
      const double ct = tr.cell_tanh[at + j];
      const double c_prev = t == 0 ? 0.0 : tr.cell[at - h + j];
      dc[j] += dh[j] * og * (1 - ct * ct);
      dz[j] = dc[j] * g * ig * (1 - ig);
      dz[h + j] = dc[j] * c_prev * fg * (1 - fg);
      dz[2 * h + j] = dh[j] * ct * og * (1 - og);
      dz[3 * h + j] = dc[j] * ig * (1 - g * g);
      dc[j] *= fg;
    }
    const auto x = sequence.row(t);
    const bool x_zero = all_zero(x);
    const double* h_prev = t == 0 ? nullptr : tr.state.data() + at - h;
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      const double d = dz[r];
      g_b[r] += d;
      if (d == 0.0) continue;
      if (!x_zero) {
        double* gw = g_wx + r * in;
        for (std::size_t c = 0; c < in; ++c) gw[c] += d * x[c];
      }
      if (h_prev != nullptr) {
        double* gw = g_wh + r * h;
        const double* w = wh + r * h;
        for (std::size_t c = 0; c < h; ++c) {
          gw[c] += d * h_prev[c];
          dh_prev[c] += d * w[c];
        }
      }
    }
    dh.swap(dh_prev);
  }
  return loss;
}

int lstm_predict(const LstmModel& m, const Matrix& sequence) { return lstm_forward(m, sequence) > 0.5 ? 1 : 0; }

LstmModel lstm_train(LstmModel model, const SequenceDataset& train, const LstmParams& params, LstmFitReport* report) {
  if (train.size() == 0) throw DataError("cannot fit an LSTM on no sequences");
  const std::size_t steps = train.sequences.front().rows();
  for (const auto& s : train.sequences) {
    if (s.rows() != steps) throw DataError("LSTM training sequences must share one length");
  }
  const std::size_t batch = std::max<std::size_t>(1, params.batch_size);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  auto theta = model.params();
  std::vector<double> grad(theta.size()), m1(theta.size(), 0.0), m2(theta.size(), 0.0);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(params.seed, 1));
  std::uint64_t step = 0;

  std::array<double, 2> class_weight{1.0, 1.0};
  if (params.balance_classes) {
    std::array<std::size_t, 2> count{0, 0};
    for (int y : train.y) ++count[y == 1 ? 1 : 0];
    for (int c = 0; c < 2; ++c) {
      if (count[c] > 0) class_weight[c] = static_cast<double>(train.size()) / (2.0 * static_cast<double>(count[c]));
    }
  }

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double w = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const double cw = class_weight[train.y[i] == 1 ? 1 : 0];
        epoch_loss += lstm_loss_and_gradient(model, train.sequences[i], train.y[i], grad, w * cw) / w;
      }
      if (!std::isfinite(epoch_loss)) throw DivergenceError("LSTM loss is not finite");
      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm)) throw DivergenceError("LSTM gradient is not finite");
      const double clip = norm > params.clip_norm ? params.clip_norm / norm : 1.0;

      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t j = 0; j < theta.size(); ++j) {
        const double g = grad[j] * clip;
        m1[j] = kBeta1 * m1[j] + (1 - kBeta1) * g;
        m2[j] = kBeta2 * m2[j] + (1 - kBeta2) * g * g;
        theta[j] -= params.learning_rate * (m1[j] / c1) / (std::sqrt(m2[j] / c2) + kEps);
      }
    }
    for (double v : theta) {
      if (!std::isfinite(v)) throw DivergenceError("LSTM parameters are not finite");
    }
    if (report != nullptr) report->epoch_loss.push_back(epoch_loss / static_cast<double>(train.size()));
  }
  return model;
}

LstmModel lstm_fit(const SequenceDataset& train, const LstmParams& params, LstmFitReport* report) {
  if (train.size() == 0) throw DataError("cannot fit an LSTM on no sequences");
  return lstm_train(lstm_init(train.sequences.front().cols(), params), train, params, report);
}

ConfusionMatrix evaluate(const LstmModel& m, const SequenceDataset& test) {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < test.size(); ++i) cm.add(test.y[i], lstm_predict(m, test.sequences[i]));
  return cm;
}

nlohmann::json to_json(const LstmModel& m) {
  return {{"model", "lstm"},
          {"input", m.input_size()},
          {"hidden", m.hidden_size()},
          {"skip_padding", m.skip_padding()},
          {"params", std::vector<double>(m.params().begin(), m.params().end())}};
}

LstmModel lstm_from_json(const nlohmann::json& doc) {
  LstmModel m(doc.at("input").get<std::size_t>(), doc.at("hidden").get<std::size_t>());
  m.set_skip_padding(doc.value("skip_padding", false));
  const auto values = doc.at("params").get<std::vector<double>>();
  if (values.size() != m.param_count()) throw DataError("LSTM parameter count mismatch");
  std::copy(values.begin(), values.end(), m.params().begin());
  return m;
}

}  // namespace coaplab
