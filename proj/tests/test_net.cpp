#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "symbreak/error.hpp"
#include "symbreak/net.hpp"

using namespace symbreak;
using net::OutputMode;
using net::ParamLayout;
using net::Topology;

namespace {

data::Dataset regression_set(int k, int d, int q, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  data::Dataset ds;
  ds.inputs = Eigen::MatrixXd::NullaryExpr(k, d, [&] { return u(rng); });
  ds.targets = Eigen::MatrixXd::NullaryExpr(k, q, [&] { return u(rng); });
  return ds;
}

Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  return Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
}

}  // namespace

TEST_CASE("topology parsing and layout") {
  const Topology t = Topology::parse("2-3-4-2", OutputMode::Classification);
  CHECK(t.layer_count() == 4);
  CHECK(t.first_hidden() == 1);
  CHECK(t.last_hidden() == 2);
  CHECK(t.to_string() == "2-3-4-2");
  CHECK_THROWS_AS(Topology::parse("2-x-1", OutputMode::Regression), InputError);
  CHECK_THROWS_AS(Topology::parse("2-1", OutputMode::Regression), InputError);
  CHECK_THROWS_AS(Topology::parse("2-0-1", OutputMode::Regression), InputError);

  const ParamLayout layout(t);
  CHECK(layout.dimension() == 3 * 3 + 4 * 4);
  CHECK(layout.neuron_offset(1, 2) == 6);
  CHECK(layout.shift_index(1, 0) == 2);
  CHECK(layout.layer_offset(2) == 9);
  CHECK(layout.weight_index(2, 1, 2) == 9 + 4 + 2);

  // Neuron (1,1): own slice plus the weight it feeds into each layer-2 neuron.
  const auto& beta = layout.beta_indices(1, 1);
  REQUIRE(beta.size() == 3 + 4);
  CHECK(beta[0] == 3);
  CHECK(beta[2] == 5);
  for (int i = 0; i < 4; ++i) CHECK(beta[3 + static_cast<std::size_t>(i)] == layout.weight_index(2, i, 1));
  CHECK(layout.beta_indices(2, 3).size() == 4);
  CHECK_THROWS_AS(layout.beta_indices(3, 0), ContractError);
  CHECK_THROWS_AS(layout.beta_indices(1, 3), ContractError);
}

TEST_CASE("forward pass") {
  SUBCASE("zero parameters give zero output") {
    const ParamLayout layout(Topology::parse("3-4-2", OutputMode::Regression));
    const Eigen::VectorXd out = net::forward(layout, Eigen::VectorXd::Zero(layout.dimension()),
                                             Eigen::MatrixXd::Zero(2, 4), Eigen::Vector3d(0.3, -1.0, 7.0));
    CHECK(out.size() == 2);
    CHECK(out.isZero(0.0));
  }
  SUBCASE("single neuron") {
    const ParamLayout layout(Topology::parse("1-1-1", OutputMode::Regression));
    const Eigen::VectorXd out =
        net::forward(layout, Eigen::Vector2d(1.0, 0.0), Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 0.5));
    CHECK(out(0) == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
  }
  SUBCASE("two hidden layers against a hand loop") {
    const ParamLayout layout(Topology::parse("2-2-1-1", OutputMode::Regression));
    // layer 1: n0 = (w 0.5, -1, tau 0.1), n1 = (w 2, 0.25, tau -0.3); layer 2: (w 1.5, -0.5, tau 0.2)
    Eigen::VectorXd p(9);
    p << 0.5, -1.0, 0.1, 2.0, 0.25, -0.3, 1.5, -0.5, 0.2;
    const double x0 = 0.4, x1 = -0.7;
    const double h0 = std::tanh(0.5 * x0 - 1.0 * x1 + 0.1);
    const double h1 = std::tanh(2.0 * x0 + 0.25 * x1 - 0.3);
    const double g = std::tanh(1.5 * h0 - 0.5 * h1 + 0.2);
    const Eigen::VectorXd out = net::forward(layout, p, Eigen::MatrixXd::Constant(1, 1, -3.0), Eigen::Vector2d(x0, x1));
    CHECK(out(0) == doctest::Approx(-3.0 * g).epsilon(1e-14));
  }
  SUBCASE("classification applies tanh to the output") {
    const ParamLayout layout(Topology::parse("1-1-2", OutputMode::Classification));
    Eigen::MatrixXd w(2, 1);
    w << 2.0, -1.0;
    const Eigen::VectorXd out = net::forward(layout, Eigen::Vector2d(1.0, 0.0), w, Eigen::VectorXd::Constant(1, 0.5));
    CHECK(out(0) == doctest::Approx(std::tanh(2.0 * std::tanh(0.5))));
    CHECK(out(1) == doctest::Approx(std::tanh(-std::tanh(0.5))));
  }
  SUBCASE("dimension mismatch") {
    const ParamLayout layout(Topology::parse("1-2-1", OutputMode::Regression));
    CHECK_THROWS_AS(net::forward(layout, Eigen::VectorXd::Zero(5), Eigen::MatrixXd::Zero(1, 2),
                                 Eigen::VectorXd::Zero(1)),
                    ContractError);
    CHECK_THROWS_AS(net::forward(layout, Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Zero(1, 3),
                                 Eigen::VectorXd::Zero(1)),
                    ContractError);
  }
}

TEST_CASE("least squares output layer") {
  const Topology reg({1, 2, 2}, OutputMode::Regression);
  SUBCASE("zero targets give zero weights") {
    Eigen::MatrixXd h(3, 2);
    h << 0.1, 0.2, -0.5, 0.3, 0.9, -0.9;
    CHECK(net::solve_output_weights(reg, h, Eigen::MatrixXd::Zero(3, 2)).isZero(0.0));
  }
  SUBCASE("scaled identity activations recover twice the targets") {
    const Eigen::MatrixXd h = 0.5 * Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd y(2, 2);
    y << 0.3, -1.2, 2.0, 0.7;
    const Eigen::MatrixXd w = net::solve_output_weights(reg, h, y);
    CHECK((w - 2.0 * y.transpose()).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("all-zero activations") {
    CHECK(net::solve_output_weights(reg, Eigen::MatrixXd::Zero(4, 2), Eigen::MatrixXd::Ones(4, 2)).isZero(0.0));
  }
  SUBCASE("classification fit targets twenty on the true class") {
    const Topology cls({1, 2, 2}, OutputMode::Classification);
    Eigen::MatrixXd h(2, 2);
    h << 0.8, 0.0, 0.0, 0.8;
    Eigen::MatrixXd y(2, 2);
    y << 1.0, 0.0, 0.0, 1.0;
    const Eigen::MatrixXd w = net::solve_output_weights(cls, h, y);
    const Eigen::MatrixXd pre = h * w.transpose();
    CHECK(pre(0, 0) == doctest::Approx(20.0).epsilon(1e-6));
    CHECK(pre(1, 1) == doctest::Approx(20.0).epsilon(1e-6));
    CHECK(std::abs(pre(0, 1)) < 1e-6);
  }
  SUBCASE("optimal against random challengers") {
    std::mt19937_64 rng(7);
    const ParamLayout layout(Topology::parse("2-4-3", OutputMode::Regression));
    const data::Dataset ds = regression_set(60, 2, 3, rng);
    const Eigen::VectorXd theta = random_vector(layout.dimension(), rng);
    const net::Fit f = net::fit(layout, theta, ds);
    int beaten = 0;
    for (int i = 0; i < 100; ++i) {
      const Eigen::MatrixXd challenger = f.out_weights + random_vector(12, rng, 0.05).reshaped(3, 4);
      const double e = net::mean_squared_error(ds.targets, net::predict(layout, theta, challenger, ds.inputs));
      if (e < f.error - 1e-12) ++beaten;
    }
    CHECK(beaten == 0);
  }
}

TEST_CASE("error functions") {
  SUBCASE("mse arithmetic") {
    Eigen::MatrixXd y(1, 2);
    y << 1.0, 0.0;
    CHECK(net::mean_squared_error(y, Eigen::MatrixXd::Zero(1, 2)) == 0.5);
    CHECK(net::mean_squared_error(y, y) == 0.0);
    CHECK_THROWS_AS(net::mean_squared_error(y, Eigen::MatrixXd::Zero(2, 2)), ContractError);
  }
  SUBCASE("exact fit") {
    // Targets produced by the network itself are matched up to the ridge term.
    std::mt19937_64 rng(3);
    const ParamLayout layout(Topology::parse("1-3-1", OutputMode::Regression));
    data::Dataset ds = regression_set(30, 1, 1, rng);
    const Eigen::VectorXd theta = random_vector(layout.dimension(), rng);
    ds.targets = net::predict(layout, theta, Eigen::MatrixXd::Constant(1, 3, 0.7), ds.inputs);
    CHECK(net::mse(layout, theta, ds) < 1e-12);
  }
  SUBCASE("empty dataset") {
    const ParamLayout layout(Topology::parse("1-1-1", OutputMode::Regression));
    data::Dataset empty;
    empty.inputs.resize(0, 1);
    empty.targets.resize(0, 1);
    CHECK_THROWS_AS(net::mse(layout, Eigen::Vector2d::Zero(), empty), ContractError);
  }
  SUBCASE("penalty") {
    std::mt19937_64 rng(11);
    const ParamLayout layout(Topology::parse("1-2-1", OutputMode::Regression));  // D = 4, radius 2
    const data::Dataset ds = regression_set(20, 1, 1, rng);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
    CHECK(net::penalized_error(layout, zero, ds) == net::mse(layout, zero, ds));

    const Eigen::VectorXd boundary = Eigen::Vector4d(1.0, 1.0, 1.0, 1.0);  // norm exactly 2
    CHECK(net::penalized_error(layout, boundary, ds) == net::mse(layout, boundary, ds));

    const Eigen::VectorXd outside = Eigen::Vector4d(1.5, 1.5, 1.5, 1.5);  // norm 3 = radius + 1
    const double expected = net::mse(layout, outside / 3.0, ds) + 50.0;
    CHECK(net::penalized_error(layout, outside, ds) == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("classification error rate") {
    Eigen::MatrixXd y(3, 2);
    y << 1, 0, 0, 1, 1, 0;
    Eigen::MatrixXd p(3, 2);
    p << 0.9, -0.2, 0.4, 0.1, -1.0, 0.0;
    CHECK(net::classification_error_rate(y, p) == doctest::Approx(2.0 / 3.0));
  }
}
