#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

ModelSpec single_layer(int in, int out, Activation act, bool residual = false) {
  ModelSpec spec;
  spec.layers = {{in, out, act, residual}};
  return spec;
}

// Independent straight-line forward pass over raw scalars; kept separate from
// the library's Eigen implementation on purpose.
std::vector<double> naive_forward(const ModelSpec& spec, const ParameterVector& params,
                                  const std::vector<double>& input) {
  std::vector<double> x = input;
  std::size_t offset = 0;
  for (const auto& l : spec.layers) {
    std::vector<double> y(static_cast<std::size_t>(l.out_width), 0.0);
    for (int o = 0; o < l.out_width; ++o) {
      double z = 0.0;
      for (int i = 0; i < l.in_width; ++i)
        z += params.values[static_cast<std::int64_t>(offset + static_cast<std::size_t>(o * l.in_width + i))] * x[static_cast<std::size_t>(i)];
      z += params.values[static_cast<std::int64_t>(
          offset + static_cast<std::size_t>(l.out_width * l.in_width + o))];
      double a = apply_activation(l.activation, z);
      if (l.residual) a += x[static_cast<std::size_t>(o)];
      y[static_cast<std::size_t>(o)] = a;
    }
    offset += static_cast<std::size_t>(l.out_width * l.in_width + l.out_width);
    x = std::move(y);
  }
  return x;
}

ModelSpec random_spec(Rng& rng) {
  const Activation acts[] = {Activation::kIdentity, Activation::kRelu, Activation::kTanh,
                             Activation::kSigmoid};
  const int n_layers = 1 + static_cast<int>(rng.uniform_index(4));
  ModelSpec spec;
  int in = 1 + static_cast<int>(rng.uniform_index(16));
  for (int i = 0; i < n_layers; ++i) {
    int out = 1 + static_cast<int>(rng.uniform_index(16));
    const bool residual = rng.uniform() < 0.3;
    if (residual) out = in;
    spec.layers.push_back({in, out, acts[rng.uniform_index(4)], residual});
    in = out;
  }
  return spec;
}

double sum_squares_loss(const ModelSpec& spec, const ParameterVector& p,
                        const Eigen::MatrixXd& x) {
  return forward(spec, p, x).output.squaredNorm();
}

}  // namespace

TEST_CASE("init_params is deterministic and seed sensitive") {
  ModelSpec spec = single_layer(2, 2, Activation::kIdentity);
  ParameterVector a = init_params(spec, 7);
  ParameterVector b = init_params(spec, 7);
  CHECK(a.values == b.values);
  ParameterVector c = init_params(spec, 8);
  CHECK(a.values != c.values);
}

TEST_CASE("init_params counts weights and biases") {
  ModelSpec spec = single_layer(2, 3, Activation::kIdentity);
  CHECK(init_params(spec, 1).size() == 9);  // 2*3 weights + 3 biases
}

TEST_CASE("init_params rejects invalid specs") {
  ModelSpec spec;
  spec.layers = {{2, 3, Activation::kRelu, false}, {4, 2, Activation::kRelu, false}};
  CHECK_THROWS_AS(init_params(spec, 1), std::invalid_argument);
  ModelSpec bad_res = single_layer(2, 3, Activation::kRelu, true);
  CHECK_THROWS_AS(init_params(bad_res, 1), std::invalid_argument);
}

TEST_CASE("forward: identity weights reproduce the input") {
  ModelSpec spec = single_layer(3, 3, Activation::kIdentity);
  ParameterVector p = zeros_like(spec);
  p.weights(spec, 0) = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd x(2, 3);
  x << 1, -2, 3, 0.5, 0, -7;
  CHECK(forward(spec, p, x).output.isApprox(x));
}

TEST_CASE("forward: relu zeroes negative pre-activations") {
  ModelSpec spec = single_layer(3, 3, Activation::kRelu);
  ParameterVector p = zeros_like(spec);
  p.weights(spec, 0) = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd x(1, 3);
  x << -1, -2, -0.01;
  CHECK(forward(spec, p, x).output.isZero());
}

TEST_CASE("forward matches an independent straight-line oracle") {
  Rng rng(99);
  ModelSpec spec;
  spec.layers = {{3, 5, Activation::kTanh, false}, {5, 2, Activation::kSigmoid, false}};
  ParameterVector p = init_params(spec, 5);
  Eigen::MatrixXd x(1, 3);
  x << 0.3, -0.7, 1.1;
  Eigen::MatrixXd out = forward(spec, p, x).output;
  std::vector<double> ref = naive_forward(spec, p, {0.3, -0.7, 1.1});
  for (int j = 0; j < 2; ++j)
    CHECK(out(0, j) == doctest::Approx(ref[static_cast<std::size_t>(j)]).epsilon(1e-12));
}

TEST_CASE("forward is referentially transparent") {
  ModelSpec spec = single_layer(4, 4, Activation::kTanh);
  ParameterVector p = init_params(spec, 11);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4);
  Eigen::MatrixXd a = forward(spec, p, x).output;
  Eigen::MatrixXd b = forward(spec, p, x).output;
  CHECK(a == b);
}

TEST_CASE("backward: scalar linear layer derivative") {
  ModelSpec spec = single_layer(1, 1, Activation::kIdentity);
  ParameterVector p = zeros_like(spec);
  p.values[0] = 0.5;  // w
  Eigen::MatrixXd x(1, 1);
  x << 3.0;
  ForwardTrace tr = forward(spec, p, x);
  Eigen::MatrixXd loss_grad(1, 1);
  loss_grad << 1.0;  // loss = y
  ParameterVector g = backward(spec, p, tr, loss_grad);
  CHECK(g.values[0] == doctest::Approx(3.0));  // d(w*x)/dw = x
  CHECK(g.values[1] == doctest::Approx(1.0));  // bias
}

TEST_CASE("backward: zero loss gradient gives zero parameter gradient") {
  ModelSpec spec = single_layer(4, 2, Activation::kTanh);
  ParameterVector p = init_params(spec, 3);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 4);
  ForwardTrace tr = forward(spec, p, x);
  ParameterVector g = backward(spec, p, tr, Eigen::MatrixXd::Zero(5, 2));
  CHECK(g.values.isZero());
}

TEST_CASE("backward matches finite differences on random small nets") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    ModelSpec spec = random_spec(rng);
    ParameterVector p = init_params(spec, rng.next_u64());
    Eigen::MatrixXd x(3, spec.input_width());
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-1.0, 1.0);

    ForwardTrace tr = forward(spec, p, x);
    ParameterVector analytic = backward(spec, p, tr, 2.0 * tr.output);
    ParameterVector fd = finite_diff_grad(
        spec, p, [&](const ParameterVector& q) { return sum_squares_loss(spec, q, x); }, 1e-4);
    const double rel = (analytic.values - fd.values).norm() /
                       std::max(1e-12, fd.values.norm());
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("finite_diff_grad: quadratic and constant losses") {
  ModelSpec spec = single_layer(1, 1, Activation::kIdentity);
  ParameterVector p = zeros_like(spec);
  p.values[0] = 2.0;
  ParameterVector g = finite_diff_grad(
      spec, p, [](const ParameterVector& q) { return q.values[0] * q.values[0]; }, 1e-4);
  CHECK(g.values[0] == doctest::Approx(4.0).epsilon(1e-6));

  ParameterVector gc = finite_diff_grad(
      spec, p, [](const ParameterVector&) { return 1.5; }, 1e-4);
  CHECK(gc.values.isZero());
}

TEST_CASE("sgd_step arithmetic") {
  ModelSpec spec = single_layer(1, 2, Activation::kIdentity);
  ParameterVector p = zeros_like(spec);
  p.values << 1, 2, 0, 0;
  ParameterVector g = zeros_like(spec);
  g.values << 1, 1, 0, 0;
  ParameterVector out = sgd_step(p, g, 0.01);
  CHECK(out.values[0] == doctest::Approx(0.99));
  CHECK(out.values[1] == doctest::Approx(1.99));

  CHECK(sgd_step(p, zeros_like(spec), 0.1).values == p.values);
  CHECK(sgd_step(p, g, 0.0).values == p.values);  // alpha = 0 is the identity
}

TEST_CASE("residual layer with zero weights is the identity") {
  ModelSpec spec = single_layer(5, 5, Activation::kTanh, true);
  ParameterVector p = zeros_like(spec);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 5);
  CHECK(forward(spec, p, x).output.isApprox(x));
}

TEST_CASE("parameter vector serialization round trip") {
  ModelSpec spec;
  spec.layers = {{3, 4, Activation::kRelu, false}, {4, 4, Activation::kTanh, true}};
  ParameterVector p = init_params(spec, 17);
  std::stringstream buf;
  write_parameter_vector(buf, p);
  ParameterVector q = read_parameter_vector(buf);
  CHECK(q.same_layout(p));
  CHECK(q.values == p.values);
}
