#pragma once

// One-hidden-layer feedforward verifier (tanh hidden units, logistic output),
// its exact backpropagated gradient and RPROP training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "sigauth/error.hpp"
#include "sigauth/random.hpp"

namespace sigauth {

struct Layout {
  std::size_t inputs = 0;
  std::size_t hidden = 0;

  // W1 (hidden x inputs, row-major), b1, w2, b2
  std::size_t parameter_count() const { return hidden * inputs + hidden + hidden + 1; }
  friend bool operator==(const Layout&, const Layout&) = default;
};

// Parameters live in one flat vector so the optimiser can treat every weight
// and bias uniformly; the accessors give structured views onto it.
class Network {
 public:
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Network() = default;
  Network(Layout layout, Eigen::VectorXd params) : layout_(layout), params_(std::move(params)) {
    if (layout_.inputs == 0 || layout_.hidden == 0)
      throw Error(ErrorCode::InvalidArgument, "network layers must be non-empty");
    if (static_cast<std::size_t>(params_.size()) != layout_.parameter_count())
      throw Error(ErrorCode::DimensionMismatch, "parameter vector does not match layout");
  }

  const Layout& layout() const { return layout_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

  Eigen::Map<const RowMajor> w1() const { return {params_.data(), rows(), cols()}; }
  Eigen::Map<const Eigen::VectorXd> b1() const { return {params_.data() + rows() * cols(), rows()}; }
  Eigen::Map<const Eigen::VectorXd> w2() const { return {params_.data() + rows() * cols() + rows(), rows()}; }
  double b2() const { return params_[params_.size() - 1]; }
  double& b2() { return params_[params_.size() - 1]; }

  friend bool operator==(const Network& a, const Network& b) {
    return a.layout_ == b.layout_ && a.params_.size() == b.params_.size() && a.params_ == b.params_;
  }

 private:
  Eigen::Index rows() const { return static_cast<Eigen::Index>(layout_.hidden); }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(layout_.inputs); }

  Layout layout_;
  Eigen::VectorXd params_;
};

// Same flat ordering as Network::params().
struct Gradient {
  Layout layout;
  Eigen::VectorXd values;
};

// Weights and biases uniform in [-0.5, 0.5].
inline Network netcreate(Layout layout, std::uint64_t init_seed) {
  if (layout.inputs == 0 || layout.hidden == 0)
    throw Error(ErrorCode::InvalidArgument, "network layers must be non-empty");
  Rng rng(init_seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  Eigen::VectorXd params(static_cast<Eigen::Index>(layout.parameter_count()));
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = unit(rng);
  return {layout, std::move(params)};
}

inline double logistic(double x) {
  const double y = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(y, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

namespace detail {

inline void check_input(const Network& net, const Eigen::VectorXd& z) {
  if (static_cast<std::size_t>(z.size()) != net.layout().inputs)
    throw Error(ErrorCode::DimensionMismatch, "input has length " + std::to_string(z.size()) + ", network expects " +
                                                  std::to_string(net.layout().inputs));
}

}  // namespace detail

// sigma(w2 . tanh(W1 z + b1) + b2), strictly inside (0, 1).
inline double forward(const Network& net, const Eigen::VectorXd& z) {
  detail::check_input(net, z);
  const Eigen::VectorXd hidden = (net.w1() * z + net.b1()).array().tanh().matrix();
  return logistic(net.w2().dot(hidden) + net.b2());
}

struct BatchGradient {
  Gradient gradient;
  double error = 0.0;  // E = mean over the batch of (y - t)^2 / 2
};

// inputs: N x k, one sample per row; targets: N values in [0, 1].
inline BatchGradient backprop_gradient(const Network& net, const Eigen::MatrixXd& inputs,
                                       const Eigen::VectorXd& targets) {
  const auto n = inputs.rows();
  if (n == 0) throw Error(ErrorCode::EmptyData, "backprop needs a non-empty batch");
  if (targets.size() != n) throw Error(ErrorCode::DimensionMismatch, "inputs and targets differ in length");
  if (static_cast<std::size_t>(inputs.cols()) != net.layout().inputs)
    throw Error(ErrorCode::DimensionMismatch, "batch width does not match network inputs");

  const auto h = static_cast<Eigen::Index>(net.layout().hidden);
  const auto k = static_cast<Eigen::Index>(net.layout().inputs);
  BatchGradient out;
  out.gradient.layout = net.layout();
  out.gradient.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.layout().parameter_count()));
  Eigen::Map<Network::RowMajor> g_w1(out.gradient.values.data(), h, k);
  Eigen::Map<Eigen::VectorXd> g_b1(out.gradient.values.data() + h * k, h);
  Eigen::Map<Eigen::VectorXd> g_w2(out.gradient.values.data() + h * k + h, h);
  double& g_b2 = out.gradient.values[out.gradient.values.size() - 1];

  const double inv_n = 1.0 / static_cast<double>(n);
  const auto w1 = net.w1();
  const auto b1 = net.b1();
  const auto w2 = net.w2();
  double error = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::VectorXd z = inputs.row(r).transpose();
    const Eigen::VectorXd hidden = (w1 * z + b1).array().tanh().matrix();
    const double y = logistic(w2.dot(hidden) + net.b2());
    const double diff = y - targets[r];
    error += 0.5 * diff * diff;

    // dE/d(output pre-activation), chained through the logistic.
    const double delta_out = diff * y * (1.0 - y) * inv_n;
    g_w2 += delta_out * hidden;
    g_b2 += delta_out;
    const Eigen::VectorXd delta_hidden =
        (delta_out * w2.array() * (1.0 - hidden.array().square())).matrix();
    g_w1 += delta_hidden * z.transpose();
    g_b1 += delta_hidden;
  }
  out.error = error * inv_n;
  return out;
}

inline double batch_error(const Network& net, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) {
  if (inputs.rows() == 0) throw Error(ErrorCode::EmptyData, "batch error needs a non-empty batch");
  double e = 0.0;
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    const double d = forward(net, inputs.row(r).transpose()) - targets[r];
    e += 0.5 * d * d;
  }
  return e / static_cast<double>(inputs.rows());
}

// ---------------------------------------------------------------------------
// RPROP

struct RpropParams {
  double eta_plus = 1.2;
  double eta_minus = 0.5;
  double delta_max = 50.0;
  double delta_min = 1e-6;
  double delta0 = 0.1;
};

struct RpropState {
  RpropParams params;
  Eigen::VectorXd step;       // per-parameter update magnitude
  Eigen::VectorXd prev_grad;  // gradient remembered from the previous step

  static RpropState init(const Network& net, const RpropParams& params = {}) {
    const auto n = static_cast<Eigen::Index>(net.layout().parameter_count());
    return {params, Eigen::VectorXd::Constant(n, params.delta0), Eigen::VectorXd::Zero(n)};
  }
};

inline double sgn(double x) { return static_cast<double>((0.0 < x) - (x < 0.0)); }

// Per parameter, with g the current and g' the remembered gradient:
//   g*g' > 0: step = min(step*eta+, max); w -= sgn(g)*step; g' = g
//   g*g' < 0: step = max(step*eta-, min); g' = 0 (weight untouched)
//   else:     w -= sgn(g)*step; g' = g
inline void rprop_step(Network& net, RpropState& state, const Gradient& grad) {
  auto& w = net.params();
  if (!(grad.layout == net.layout()) || grad.values.size() != w.size() || state.step.size() != w.size() ||
      state.prev_grad.size() != w.size())
    throw Error(ErrorCode::DimensionMismatch, "rprop shapes do not match the network");
  const auto& p = state.params;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double g = grad.values[i];
    const double product = g * state.prev_grad[i];
    if (product > 0.0) {
      state.step[i] = std::min(state.step[i] * p.eta_plus, p.delta_max);
      w[i] -= sgn(g) * state.step[i];
      state.prev_grad[i] = g;
    } else if (product < 0.0) {
      state.step[i] = std::max(state.step[i] * p.eta_minus, p.delta_min);
      state.prev_grad[i] = 0.0;
    } else {
      w[i] -= sgn(g) * state.step[i];
      state.prev_grad[i] = g;
    }
  }
}

struct TrainOptions {
  std::size_t max_epochs = 200;
  double err_goal = 1e-3;
  RpropParams rprop;
};

struct TrainResult {
  Network net;
  double error = 0.0;       // batch error of the returned network
  std::size_t epochs = 0;   // gradient evaluations performed
};

// Full-batch RPROP. Each epoch evaluates the gradient; training stops before
// updating once the error reaches err_goal, or after max_epochs updates.
inline TrainResult sigtrain(Network net, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                            const TrainOptions& opts = {}) {
  if (inputs.rows() == 0) throw Error(ErrorCode::EmptyData, "sigtrain needs at least one sample");
  if (targets.size() != inputs.rows()) throw Error(ErrorCode::DimensionMismatch, "inputs and targets differ in length");

  auto state = RpropState::init(net, opts.rprop);
  for (std::size_t epoch = 0; epoch < opts.max_epochs; ++epoch) {
    auto [grad, error] = backprop_gradient(net, inputs, targets);
    if (error <= opts.err_goal) return {std::move(net), error, epoch + 1};
    rprop_step(net, state, grad);
  }
  const double error = batch_error(net, inputs, targets);
  return {std::move(net), error, opts.max_epochs};
}

// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const Network& net) {
  const auto& p = net.params();
  return {{"inputs", net.layout().inputs},
          {"hidden", net.layout().hidden},
          {"params", std::vector<double>(p.data(), p.data() + p.size())}};
}

inline Network network_from_json(const nlohmann::json& j) {
  Layout layout{j.at("inputs").get<std::size_t>(), j.at("hidden").get<std::size_t>()};
  const auto flat = j.at("params").get<std::vector<double>>();
  Eigen::VectorXd params = Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
  return {layout, std::move(params)};
}

}  // namespace sigauth
