#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "coaplab/classifiers.hpp"
#include "coaplab/dataset.hpp"
#include "coaplab/matrix.hpp"

namespace coaplab {

struct LstmParams {
  std::size_t hidden = 32;
  std::size_t epochs = 10;
  double learning_rate = 0.01;
  std::size_t batch_size = 1;
  double clip_norm = 5.0;
  double forget_bias = 1.0;
  // Weight each class's loss by n / (2 n_class) so a rare malicious class is not drowned out.
  bool balance_classes = true;
  // Stop reading a sequence at its last non-zero row, so all-zero pad rows never reach the cell.
  bool skip_padding = true;
  std::uint64_t seed = 13;
};

/// Single-layer LSTM with a sigmoid readout of the final hidden state.
///
/// All parameters live in one flat vector so optimisers and gradient checks can treat them uniformly.
/// Gate blocks are stacked in the order input, forget, output, candidate.
class LstmModel {
 public:
  LstmModel() = default;
  LstmModel(std::size_t input, std::size_t hidden);

  std::size_t input_size() const { return input_; }
  std::size_t hidden_size() const { return hidden_; }

  std::span<double> params() { return theta_; }
  std::span<const double> params() const { return theta_; }

  // Offsets into params().
  std::size_t input_weights() const { return 0; }                                   // 4h x input
  std::size_t recurrent_weights() const { return 4 * hidden_ * input_; }            // 4h x h
  std::size_t gate_bias() const { return recurrent_weights() + 4 * hidden_ * hidden_; }  // 4h
  std::size_t output_weights() const { return gate_bias() + 4 * hidden_; }          // h
  std::size_t output_bias() const { return output_weights() + hidden_; }            // 1
  std::size_t param_count() const { return output_bias() + 1; }

  bool skip_padding() const { return skip_padding_; }
  void set_skip_padding(bool on) { skip_padding_ = on; }

  bool operator==(const LstmModel&) const = default;

 private:
  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
  bool skip_padding_ = false;
  std::vector<double> theta_;
};

/// Per-step activations kept for backpropagation.
struct LstmTrace {
  std::size_t hidden = 0;
  std::vector<double> input_gate, forget_gate, output_gate, candidate, cell, cell_tanh, state;  // steps x h
  double probability = 0.5;
};

LstmModel lstm_init(std::size_t input, const LstmParams& params);
/// Number of steps the model reads: all rows, or up to the last non-zero row when skipping padding.
std::size_t lstm_steps(const LstmModel& m, const Matrix& sequence);
double lstm_forward(const LstmModel& m, const Matrix& sequence, LstmTrace* trace = nullptr);
/// Binary cross-entropy of one sequence; gradient (same layout as params()) is accumulated into grad.
double lstm_loss_and_gradient(const LstmModel& m, const Matrix& sequence, int label, std::span<double> grad,
                              double weight = 1.0);
int lstm_predict(const LstmModel& m, const Matrix& sequence);

struct LstmFitReport {
  std::vector<double> epoch_loss;
};

/// Adam on BCE with full backpropagation through time; gradients clipped to clip_norm.
LstmModel lstm_fit(const SequenceDataset& train, const LstmParams& params = {}, LstmFitReport* report = nullptr);
/// Continues training an existing model.
LstmModel lstm_train(LstmModel model, const SequenceDataset& train, const LstmParams& params,
                     LstmFitReport* report = nullptr);

ConfusionMatrix evaluate(const LstmModel& m, const SequenceDataset& test);

nlohmann::json to_json(const LstmModel& m);
LstmModel lstm_from_json(const nlohmann::json& doc);

}  // namespace coaplab
