#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "sigauth/nnet.hpp"
#include "support.hpp"

using namespace sigauth;
using sigauth::test::code_of;
using sigauth::test::random_matrix;

namespace {

// Layer-by-layer evaluation with explicit loops over the flat parameters.
double oracle_forward(const Network& net, const Eigen::VectorXd& z) {
  const auto k = net.layout().inputs, h = net.layout().hidden;
  const auto& p = net.params();
  double out = p[static_cast<Eigen::Index>(h * k + 2 * h)];
  for (std::size_t j = 0; j < h; ++j) {
    double a = p[static_cast<Eigen::Index>(h * k + j)];
    for (std::size_t i = 0; i < k; ++i) a += p[static_cast<Eigen::Index>(j * k + i)] * z[static_cast<Eigen::Index>(i)];
    out += p[static_cast<Eigen::Index>(h * k + h + j)] * std::tanh(a);
  }
  return 1.0 / (1.0 + std::exp(-out));
}

double oracle_error(const Network& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
  double e = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double d = oracle_forward(net, x.row(r).transpose()) - t[r];
    e += 0.5 * d * d;
  }
  return e / static_cast<double>(x.rows());
}

Eigen::VectorXd binary_targets(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t[i] = static_cast<double>(rng() & 1u);
  return t;
}

Gradient grad_of(const Network& net, std::initializer_list<double> g) {
  Gradient out{net.layout(), Eigen::VectorXd(static_cast<Eigen::Index>(g.size()))};
  Eigen::Index i = 0;
  for (double v : g) out.values[i++] = v;
  return out;
}

}  // namespace

TEST(Netcreate, DeterministicAndBounded) {
  const Layout layout{5, 7};
  const auto a = netcreate(layout, 11);
  EXPECT_EQ(a, netcreate(layout, 11));
  EXPECT_FALSE(a == netcreate(layout, 12));
  EXPECT_EQ(static_cast<std::size_t>(a.params().size()), 5u * 7u + 7u + 7u + 1u);
  EXPECT_LE(a.params().cwiseAbs().maxCoeff(), 0.5);
  EXPECT_EQ(code_of([] { netcreate({0, 3}, 1); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { netcreate({3, 0}, 1); }), ErrorCode::InvalidArgument);
}

TEST(Forward, ZeroNetworkGivesHalf) {
  const Network net({3, 4}, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(Layout{3, 4}.parameter_count())));
  EXPECT_EQ(forward(net, random_matrix(3, 1, 1)), 0.5);
}

TEST(Forward, MonotoneInOutputBias) {
  auto net = netcreate({3, 4}, 2);
  const Eigen::VectorXd z = random_matrix(3, 1, 2);
  double prev = forward(net, z);
  for (int i = 0; i < 10; ++i) {
    net.b2() += 0.3;
    const double next = forward(net, z);
    EXPECT_GT(next, prev);
    prev = next;
  }
}

TEST(Forward, MatchesLayerOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = netcreate({6, 5}, seed);
    const Eigen::VectorXd z = random_matrix(6, 1, seed + 100);
    EXPECT_NEAR(forward(net, z), oracle_forward(net, z), 1e-12);
  }
}

TEST(Forward, StrictlyInsideUnitInterval) {
  auto net = netcreate({2, 2}, 3);
  net.b2() = 1e6;
  EXPECT_LT(forward(net, Eigen::VectorXd::Zero(2)), 1.0);
  net.b2() = -1e6;
  EXPECT_GT(forward(net, Eigen::VectorXd::Zero(2)), 0.0);
  EXPECT_EQ(code_of([&] { forward(net, Eigen::VectorXd::Zero(3)); }), ErrorCode::DimensionMismatch);
}

TEST(Backprop, ErrorMatchesOracle) {
  const auto net = netcreate({4, 6}, 4);
  const auto x = random_matrix(9, 4, 4);
  const auto t = binary_targets(9, 4);
  EXPECT_NEAR(backprop_gradient(net, x, t).error, oracle_error(net, x, t), 1e-14);
  EXPECT_NEAR(batch_error(net, x, t), oracle_error(net, x, t), 1e-14);
}

TEST(Backprop, FiniteDifferenceAgreement) {
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto net = netcreate({3 + seed % 4, 2 + seed % 5}, seed);
    const auto x = random_matrix(5 + static_cast<Eigen::Index>(seed % 7), static_cast<Eigen::Index>(net.layout().inputs), seed);
    const auto t = binary_targets(x.rows(), seed);
    const auto analytic = backprop_gradient(net, x, t).gradient.values;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
      const double w = net.params()[i];
      net.params()[i] = w + h;
      const double up = oracle_error(net, x, t);
      net.params()[i] = w - h;
      const double down = oracle_error(net, x, t);
      net.params()[i] = w;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
      EXPECT_LE(std::abs(numeric - analytic[i]) / scale, 1e-4) << "seed " << seed << " param " << i;
    }
  }
}

TEST(Backprop, ZeroWhenOutputsEqualTargets) {
  const auto net = netcreate({3, 4}, 5);
  const auto x = random_matrix(6, 3, 5);
  Eigen::VectorXd t(6);
  for (Eigen::Index r = 0; r < 6; ++r) t[r] = forward(net, x.row(r).transpose());
  const auto g = backprop_gradient(net, x, t);
  EXPECT_EQ(g.error, 0.0);
  EXPECT_EQ(g.gradient.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backprop, DuplicatedBatchLeavesGradientUnchanged) {
  const auto net = netcreate({3, 4}, 6);
  const auto x = random_matrix(7, 3, 6);
  const auto t = binary_targets(7, 6);
  Eigen::MatrixXd x2(14, 3);
  x2 << x, x;
  Eigen::VectorXd t2(14);
  t2 << t, t;
  const auto a = backprop_gradient(net, x, t);
  const auto b = backprop_gradient(net, x2, t2);
  EXPECT_LT((a.gradient.values - b.gradient.values).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(a.error, b.error, 1e-15);
}

TEST(Backprop, Errors) {
  const auto net = netcreate({3, 4}, 7);
  EXPECT_EQ(code_of([&] { backprop_gradient(net, Eigen::MatrixXd(0, 3), Eigen::VectorXd(0)); }), ErrorCode::EmptyData);
  EXPECT_EQ(code_of([&] { backprop_gradient(net, random_matrix(2, 3, 1), Eigen::VectorXd::Zero(3)); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { backprop_gradient(net, random_matrix(2, 4, 1), Eigen::VectorXd::Zero(2)); }),
            ErrorCode::DimensionMismatch);
}

// Scripted single-parameter runs of the update rule.
class RpropScript : public ::testing::Test {
 protected:
  // Layout {1,1} has four parameters; only parameter 0 receives gradient.
  Network net{Layout{1, 1}, Eigen::VectorXd::Zero(4)};
  RpropState state = RpropState::init(net);

  void step(double g) { rprop_step(net, state, grad_of(net, {g, 0.0, 0.0, 0.0})); }
  double w() const { return net.params()[0]; }
};

TEST_F(RpropScript, FirstStepUsesInitialDelta) {
  step(2.0);
  EXPECT_DOUBLE_EQ(w(), -0.1);
  EXPECT_DOUBLE_EQ(state.step[0], 0.1);
  EXPECT_EQ(state.prev_grad[0], 2.0);
}

TEST_F(RpropScript, AgreementGrowsStep) {
  step(2.0);
  step(1.0);
  EXPECT_DOUBLE_EQ(state.step[0], 0.1 * 1.2);
  EXPECT_DOUBLE_EQ(w(), -0.1 - 0.12);
  EXPECT_EQ(state.prev_grad[0], 1.0);
}

TEST_F(RpropScript, SignFlipShrinksAndHolds) {
  step(2.0);
  step(1.0);
  const double before = w();
  step(-3.0);
  EXPECT_DOUBLE_EQ(state.step[0], 0.12 * 0.5);
  EXPECT_EQ(w(), before);
  EXPECT_EQ(state.prev_grad[0], 0.0);
  // Zero product after the flip: plain step with the shrunken delta.
  step(-3.0);
  EXPECT_DOUBLE_EQ(w(), before + 0.06);
  EXPECT_EQ(state.prev_grad[0], -3.0);
}

TEST_F(RpropScript, StepCappedAtMax) {
  for (int i = 0; i < 60; ++i) step(1.0);
  EXPECT_EQ(state.step[0], 50.0);
}

TEST_F(RpropScript, StepFlooredAtMin) {
  for (int i = 0; i < 80; ++i) step(i % 2 ? -1.0 : 1.0);
  EXPECT_EQ(state.step[0], 1e-6);
}

TEST_F(RpropScript, ZeroGradientLeavesWeight) {
  step(0.0);
  EXPECT_EQ(w(), 0.0);
  EXPECT_EQ(state.step[0], 0.1);
  EXPECT_EQ(state.prev_grad[0], 0.0);
}

TEST(Rprop, StepBoundsAndUpdateMagnitude) {
  auto net = netcreate({3, 5}, 8);
  const auto x = random_matrix(12, 3, 8);
  const auto t = binary_targets(12, 8);
  auto state = RpropState::init(net);
  for (int epoch = 0; epoch < 50; ++epoch) {
    const auto g = backprop_gradient(net, x, t).gradient;
    const Eigen::VectorXd before = net.params();
    rprop_step(net, state, g);
    for (Eigen::Index i = 0; i < before.size(); ++i) {
      EXPECT_GE(state.step[i], 1e-6);
      EXPECT_LE(state.step[i], 50.0);
      const double moved = std::abs(net.params()[i] - before[i]);
      if (moved != 0.0) {
        EXPECT_NEAR(moved, state.step[i], 1e-12 * (1.0 + std::abs(before[i])));
      }
    }
  }
}

TEST(Rprop, ShapeMismatch) {
  auto net = netcreate({2, 2}, 1);
  auto state = RpropState::init(net);
  EXPECT_EQ(code_of([&] { rprop_step(net, state, Gradient{Layout{2, 3}, Eigen::VectorXd::Zero(13)}); }),
            ErrorCode::DimensionMismatch);
}

TEST(Sigtrain, SolvesXor) {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  Eigen::VectorXd t(4);
  t << 0, 1, 1, 0;
  const auto r = sigtrain(netcreate({2, 4}, 1), x, t, {500, 0.0, {}});
  EXPECT_LT(r.error, 0.05);
}

TEST(Sigtrain, InfiniteGoalStopsAfterOneEpoch) {
  const auto net = netcreate({2, 3}, 2);
  const auto r = sigtrain(net, random_matrix(5, 2, 2), binary_targets(5, 2),
                          {200, std::numeric_limits<double>::infinity(), {}});
  EXPECT_EQ(r.epochs, 1u);
  EXPECT_TRUE(std::isfinite(r.error));
  EXPECT_EQ(r.net, net);
}

TEST(Sigtrain, ZeroEpochsReturnsInput) {
  const auto net = netcreate({2, 3}, 3);
  const auto r = sigtrain(net, random_matrix(5, 2, 3), binary_targets(5, 3), {0, 1e-3, {}});
  EXPECT_EQ(r.net, net);
  EXPECT_EQ(r.epochs, 0u);
}

TEST(Sigtrain, PureFunction) {
  const auto net = netcreate({3, 4}, 4);
  const auto x = random_matrix(10, 3, 4);
  const auto t = binary_targets(10, 4);
  const auto a = sigtrain(net, x, t);
  const auto b = sigtrain(net, x, t);
  EXPECT_EQ(a.net, b.net);
  EXPECT_EQ(a.error, b.error);
  EXPECT_EQ(code_of([&] { sigtrain(net, Eigen::MatrixXd(0, 3), Eigen::VectorXd(0)); }), ErrorCode::EmptyData);
}

TEST(NetworkJson, LosslessRoundTrip) {
  const auto net = netcreate({7, 3}, 9);
  const auto back = network_from_json(nlohmann::json::parse(to_json(net).dump()));
  EXPECT_EQ(back, net);
}
