#pragma once

#include "pessim/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <vector>

namespace pessim {

/// One affine map y = W x + b.
struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// ReLU feed-forward network: every layer but the last is followed by ReLU,
/// the last layer is affine. Depth counts hidden layers (layers().size() - 1).
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<DenseLayer> layers);

  /// He-uniform weights, zero biases. `widths` lists hidden widths.
  static Network random(int input_dim, const std::vector<int>& widths, int output_dim,
                        std::uint64_t seed);
  static Network zeros(int input_dim, const std::vector<int>& widths, int output_dim);

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  int depth() const { return static_cast<int>(layers_.size()) - 1; }
  /// Largest hidden width (0 for a purely affine network).
  int width() const;
  std::int64_t param_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Vector flat_params() const;
  void set_flat_params(const Vector& params);

 private:
  std::vector<DenseLayer> layers_;
};

/// Exact layer recursion. Throws InvalidInput on a shape mismatch.
Vector forward(const Network& net, const Vector& x);

/// Batched forward pass: inputs are input_dim x N, the result output_dim x N.
Matrix forward_batch(const Network& net, const Matrix& inputs);

/// Every hidden activation (post-ReLU) and the output for one input.
std::vector<Vector> forward_trace(const Network& net, const Vector& x);

/// Gradient of sum_i <output_grads[:, i], net(inputs[:, i])> with respect to
/// all parameters, laid out like Network::flat_params().
Vector backward(const Network& net, const Matrix& inputs, const Matrix& output_grads);

struct TrainerConfig {
  int epochs = 2000;
  double learning_rate = 0.05;
  /// Multiplicative decay applied to the step every epoch.
  double decay = 1.0;
  /// Stop early once the loss falls below this value.
  double target_loss = 0.0;
};

struct TrainResult {
  Network net;
  std::vector<double> loss_trace;
  bool diverged = false;
};

/// Full-batch gradient descent on mean squared error. Inputs d x N, targets
/// output_dim x N. Deterministic given the starting network.
TrainResult train_regression(Network net, const Matrix& inputs, const Matrix& targets,
                             const TrainerConfig& cfg);

double mean_squared_error(const Network& net, const Matrix& inputs, const Matrix& targets);

/// {"shape": [[out,in],...], "params": [flat...]}
nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& doc);

}  // namespace pessim
