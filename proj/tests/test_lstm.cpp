#include <doctest.h>

#include <cmath>

#include "coaplab/error.hpp"
#include "coaplab/lstm.hpp"
#include "coaplab/random.hpp"

using namespace coaplab;

namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Step-by-step scalar recomputation reading parameters by (gate, unit, column).
double reference_forward(const LstmModel& m, const Matrix& seq) {
  const std::size_t h = m.hidden_size(), in = m.input_size();
  const auto p = m.params();
  auto wx = [&](std::size_t gate, std::size_t unit, std::size_t c) { return p[(gate * h + unit) * in + c]; };
  auto wh = [&](std::size_t gate, std::size_t unit, std::size_t c) {
    return p[m.recurrent_weights() + (gate * h + unit) * h + c];
  };
  auto b = [&](std::size_t gate, std::size_t unit) { return p[m.gate_bias() + gate * h + unit]; };
  std::vector<double> hs(h, 0), cs(h, 0);
  for (std::size_t t = 0; t < seq.rows(); ++t) {
    std::vector<double> next_h(h), next_c(h);
    for (std::size_t u = 0; u < h; ++u) {
      double z[4];
      for (std::size_t g = 0; g < 4; ++g) {
        z[g] = b(g, u);
        for (std::size_t c = 0; c < in; ++c) z[g] += wx(g, u, c) * seq(t, c);
        for (std::size_t c = 0; c < h; ++c) z[g] += wh(g, u, c) * hs[c];
      }
      const double i = sig(z[0]), f = sig(z[1]), o = sig(z[2]), g = std::tanh(z[3]);
      next_c[u] = f * cs[u] + i * g;
      next_h[u] = o * std::tanh(next_c[u]);
    }
    hs = next_h;
    cs = next_c;
  }
  double logit = p[m.output_bias()];
  for (std::size_t u = 0; u < h; ++u) logit += p[m.output_weights() + u] * hs[u];
  return sig(logit);
}

LstmModel random_model(std::size_t in, std::size_t h, std::uint64_t seed) {
  LstmModel m(in, h);
  Rng rng(seed);
  for (auto& v : m.params()) v = rng.uniform_real(-0.8, 0.8);
  return m;
}

Matrix random_sequence(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix s(rows, cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) s(r, c) = rng.uniform_real(-1, 1);
  }
  return s;
}

double bce(const LstmModel& m, const Matrix& seq, int y) {
  const double p = lstm_forward(m, seq);
  return y == 1 ? -std::log(p) : -std::log(1 - p);
}

SequenceDataset toy_set(std::size_t n, std::size_t steps, std::size_t in) {
  Rng rng(21);
  SequenceDataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    Matrix s(steps, in, 0.0);
    for (std::size_t r = 0; r < steps; ++r) {
      for (std::size_t c = 0; c < in; ++c) s(r, c) = (y == 1 ? 0.6 : -0.6) + rng.uniform_real(-0.3, 0.3);
    }
    d.sequences.push_back(s);
    d.y.push_back(y);
  }
  return d;
}

}  // namespace

TEST_CASE("all-zero parameters output one half") {
  LstmModel m(4, 3);
  LstmTrace tr;
  Rng rng(1);
  CHECK(lstm_forward(m, random_sequence(rng, 5, 4), &tr) == 0.5);
  for (double c : tr.cell) CHECK(c == 0.0);
  for (double s : tr.state) CHECK(s == 0.0);
}

TEST_CASE("forward pass matches a scalar recomputation") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const LstmModel m = random_model(4, 2, 100 + trial);
    const Matrix seq = random_sequence(rng, 3, 4);
    CHECK(lstm_forward(m, seq) == doctest::Approx(reference_forward(m, seq)).epsilon(1e-12));
  }
  SUBCASE("one step is one memory-block application") {
    const LstmModel m = random_model(3, 2, 7);
    const Matrix seq = random_sequence(rng, 1, 3);
    CHECK(lstm_forward(m, seq) == doctest::Approx(reference_forward(m, seq)).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(3);
  for (int label = 0; label < 2; ++label) {
    const LstmModel m = random_model(5, 3, 40 + label);
    const Matrix seq = random_sequence(rng, 4, 5);
    std::vector<double> grad(m.param_count(), 0.0);
    lstm_loss_and_gradient(m, seq, label, grad);
    constexpr double eps = 1e-5;
    double worst = 0;
    for (std::size_t k = 0; k < m.param_count(); ++k) {
      LstmModel plus = m, minus = m;
      plus.params()[k] += eps;
      minus.params()[k] -= eps;
      const double numeric = (bce(plus, seq, label) - bce(minus, seq, label)) / (2 * eps);
      const double denom = std::max({std::abs(numeric), std::abs(grad[k]), 1e-7});
      worst = std::max(worst, std::abs(numeric - grad[k]) / denom);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("padding rows are skipped only when asked") {
  LstmModel m = random_model(2, 3, 9);
  Rng rng(4);
  Matrix seq = random_sequence(rng, 6, 2);
  for (std::size_t r = 3; r < 6; ++r) seq(r, 0) = seq(r, 1) = 0.0;
  Matrix prefix(3, 2, 0.0);
  for (std::size_t r = 0; r < 3; ++r) prefix(r, 0) = seq(r, 0), prefix(r, 1) = seq(r, 1);

  CHECK(lstm_forward(m, seq) == doctest::Approx(reference_forward(m, seq)).epsilon(1e-12));
  m.set_skip_padding(true);
  CHECK(lstm_steps(m, seq) == 3);
  CHECK(lstm_forward(m, seq) == doctest::Approx(reference_forward(m, prefix)).epsilon(1e-12));

  std::vector<double> g_full(m.param_count(), 0.0), g_prefix(m.param_count(), 0.0);
  lstm_loss_and_gradient(m, seq, 1, g_full);
  lstm_loss_and_gradient(m, prefix, 1, g_prefix);
  for (std::size_t k = 0; k < g_full.size(); ++k) CHECK(g_full[k] == doctest::Approx(g_prefix[k]));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const SequenceDataset d = toy_set(10, 5, 3);
  LstmParams p;
  p.hidden = 4;
  p.epochs = 3;
  p.learning_rate = 0;
  const LstmModel init = lstm_init(3, p);
  CHECK(lstm_train(init, d, p) == init);
}

TEST_CASE("training loss decreases on a toy set") {
  const SequenceDataset d = toy_set(10, 6, 3);
  LstmParams p;
  p.hidden = 8;
  p.epochs = 5;
  LstmFitReport report;
  const LstmModel m = lstm_fit(d, p, &report);
  REQUIRE(report.epoch_loss.size() == 5);
  for (std::size_t e = 1; e < 5; ++e) CHECK(report.epoch_loss[e] < report.epoch_loss[e - 1]);
  SUBCASE("deterministic under seed") { CHECK(lstm_fit(d, p) == m); }
  SUBCASE("JSON round trip") { CHECK(lstm_from_json(to_json(m)) == m); }
}

TEST_CASE("forget gate bias starts positive") {
  LstmParams p;
  p.hidden = 5;
  const LstmModel m = lstm_init(3, p);
  for (std::size_t j = 0; j < 5; ++j) CHECK(m.params()[m.gate_bias() + 5 + j] > 0);
}

TEST_CASE("shape errors") {
  const LstmModel m(3, 2);
  CHECK_THROWS_AS(lstm_forward(m, Matrix(2, 4, 1.0)), DataError);
  CHECK_THROWS_AS(lstm_fit(SequenceDataset{}), DataError);
}

TEST_CASE("divergence is reported") {
  SequenceDataset d = toy_set(4, 3, 2);
  d.sequences[0](0, 0) = std::nan("");
  LstmParams p;
  p.hidden = 2;
  p.epochs = 1;
  CHECK_THROWS_AS(lstm_fit(d, p), DivergenceError);
}
