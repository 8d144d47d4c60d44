#include "pessim/network.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace pessim {

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidInput("network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rows() != l.bias.size() || l.weight.rows() == 0 || l.weight.cols() == 0)
      throw InvalidInput("layer " + std::to_string(i) + " has inconsistent shapes");
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
      throw InvalidInput("layer " + std::to_string(i) + " does not chain to its predecessor");
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw InvalidInput("layer " + std::to_string(i) + " has non-finite entries");
  }
}

Network Network::zeros(int input_dim, const std::vector<int>& widths, int output_dim) {
  std::vector<DenseLayer> layers;
  int prev = input_dim;
  for (int w : widths) {
    layers.push_back({Matrix::Zero(w, prev), Vector::Zero(w)});
    prev = w;
  }
  layers.push_back({Matrix::Zero(output_dim, prev), Vector::Zero(output_dim)});
  return Network(std::move(layers));
}

Network Network::random(int input_dim, const std::vector<int>& widths, int output_dim,
                        std::uint64_t seed) {
  Network net = zeros(input_dim, widths, output_dim);
  Rng rng(seed);
  for (auto& layer : net.layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
      layer.weight.data()[i] = rng.uniform(-bound, bound);
  }
  return net;
}

int Network::width() const {
  int w = 0;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i)
    w = std::max(w, static_cast<int>(layers_[i].weight.rows()));
  return w;
}

std::int64_t Network::param_count() const {
  std::int64_t p = 0;
  for (const auto& l : layers_) p += l.weight.size() + l.bias.size();
  return p;
}

Vector Network::flat_params() const {
  Vector out(param_count());
  Eigen::Index k = 0;
  for (const auto& l : layers_) {
    out.segment(k, l.weight.size()) = Eigen::Map<const Vector>(l.weight.data(), l.weight.size());
    k += l.weight.size();
    out.segment(k, l.bias.size()) = l.bias;
    k += l.bias.size();
  }
  return out;
}

void Network::set_flat_params(const Vector& params) {
  if (params.size() != param_count()) throw InvalidInput("parameter vector has wrong length");
  Eigen::Index k = 0;
  for (auto& l : layers_) {
    Eigen::Map<Vector>(l.weight.data(), l.weight.size()) = params.segment(k, l.weight.size());
    k += l.weight.size();
    l.bias = params.segment(k, l.bias.size());
    k += l.bias.size();
  }
}

Vector forward(const Network& net, const Vector& x) {
  if (x.size() != net.input_dim()) throw InvalidInput("input dimension mismatch");
  Vector h = x;
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].weight * h + layers[i].bias;
    if (i + 1 < layers.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

Matrix forward_batch(const Network& net, const Matrix& inputs) {
  if (inputs.rows() != net.input_dim()) throw InvalidInput("input dimension mismatch");
  Matrix h = inputs;
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = (layers[i].weight * h).colwise() + layers[i].bias;
    if (i + 1 < layers.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

std::vector<Vector> forward_trace(const Network& net, const Vector& x) {
  if (x.size() != net.input_dim()) throw InvalidInput("input dimension mismatch");
  std::vector<Vector> out;
  Vector h = x;
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].weight * h + layers[i].bias;
    if (i + 1 < layers.size()) h = h.cwiseMax(0.0);
    out.push_back(h);
  }
  return out;
}

Vector backward(const Network& net, const Matrix& inputs, const Matrix& output_grads) {
  const auto& layers = net.layers();
  if (inputs.rows() != net.input_dim() || output_grads.rows() != net.output_dim() ||
      inputs.cols() != output_grads.cols())
    throw InvalidInput("backward: shape mismatch");

  // Post-activation values per layer; acts[0] is the input.
  std::vector<Matrix> acts;
  acts.reserve(layers.size());
  acts.push_back(inputs);
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    Matrix z = (layers[i].weight * acts.back()).colwise() + layers[i].bias;
    acts.push_back(z.cwiseMax(0.0));
  }

  Vector grad(net.param_count());
  std::vector<Eigen::Index> offsets(layers.size());
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    offsets[i] = k;
    k += layers[i].weight.size() + layers[i].bias.size();
  }

  Matrix delta = output_grads;  // gradient w.r.t. the pre-activation of layer i
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Matrix gw = delta * acts[i].transpose();
    const Vector gb = delta.rowwise().sum();
    grad.segment(offsets[i], gw.size()) = Eigen::Map<const Vector>(gw.data(), gw.size());
    grad.segment(offsets[i] + gw.size(), gb.size()) = gb;
    if (i == 0) break;
    Matrix back = layers[i].weight.transpose() * delta;
    // ReLU derivative: 1 where the activation was positive.
    delta = back.cwiseProduct((acts[i].array() > 0.0).cast<double>().matrix());
  }
  return grad;
}

double mean_squared_error(const Network& net, const Matrix& inputs, const Matrix& targets) {
  const Matrix diff = forward_batch(net, inputs) - targets;
  return diff.squaredNorm() / static_cast<double>(inputs.cols());
}

TrainResult train_regression(Network net, const Matrix& inputs, const Matrix& targets,
                             const TrainerConfig& cfg) {
  if (inputs.cols() != targets.cols() || targets.rows() != net.output_dim())
    throw InvalidInput("train_regression: inputs and targets disagree in shape");
  if (!inputs.allFinite() || !targets.allFinite())
    throw InvalidInput("train_regression: non-finite data");
  TrainResult result;
  const double n = static_cast<double>(inputs.cols());
  double lr = cfg.learning_rate;
  Vector params = net.flat_params();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Matrix diff = forward_batch(net, inputs) - targets;
    const double loss = diff.squaredNorm() / n;
    result.loss_trace.push_back(loss);
    if (!std::isfinite(loss)) {
      result.diverged = true;
      break;
    }
    if (loss <= cfg.target_loss) break;
    params -= lr * backward(net, inputs, (2.0 / n) * diff);
    net.set_flat_params(params);
    lr *= cfg.decay;
  }
  if (!result.diverged) {
    const double final_loss = mean_squared_error(net, inputs, targets);
    if (!std::isfinite(final_loss)) result.diverged = true;
    result.loss_trace.push_back(final_loss);
  }
  result.net = std::move(net);
  return result;
}

nlohmann::json to_json(const Network& net) {
  nlohmann::json shape = nlohmann::json::array();
  for (const auto& l : net.layers()) shape.push_back({l.weight.rows(), l.weight.cols()});
  const Vector p = net.flat_params();
  return {{"activation", "relu"},
          {"shape", shape},
          {"params", std::vector<double>(p.data(), p.data() + p.size())}};
}

Network network_from_json(const nlohmann::json& doc) {
  try {
    std::vector<DenseLayer> layers;
    for (const auto& s : doc.at("shape")) {
      const auto rows = s.at(0).get<Eigen::Index>();
      const auto cols = s.at(1).get<Eigen::Index>();
      layers.push_back({Matrix::Zero(rows, cols), Vector::Zero(rows)});
    }
    Network net(std::move(layers));
    const auto p = doc.at("params").get<std::vector<double>>();
    net.set_flat_params(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size())));
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed network document: ") + e.what());
  }
}

}  // namespace pessim
