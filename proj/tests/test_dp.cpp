#include <doctest.h>

#include <cmath>

#include "fedsim/dp.hpp"

using namespace fedsim;

namespace {

ParameterVector flat(std::initializer_list<double> vals) {
  ParameterVector p;
  p.values.resize(static_cast<std::int64_t>(vals.size()));
  std::int64_t i = 0;
  for (double v : vals) p.values[i++] = v;
  p.layout = {{0, p.values.size()}};
  return p;
}

}  // namespace

TEST_CASE("clip_gradient rescales to the threshold") {
  ParameterVector g = flat({6, 8});  // norm 10
  ParameterVector out = clip_gradient(g, 1.0);
  CHECK(out.values.norm() == doctest::Approx(1.0));
  CHECK(out.values[0] == doctest::Approx(0.6));

  ParameterVector small = flat({0.3, 0.4});  // norm 0.5
  CHECK(clip_gradient(small, 1.0).values == small.values);

  ParameterVector ex = flat({3, 4});  // norm 5, factor 0.5
  ParameterVector clipped = clip_gradient(ex, 2.5);
  CHECK(clipped.values[0] == doctest::Approx(1.5));
  CHECK(clipped.values[1] == doctest::Approx(2.0));
}

TEST_CASE("clip_gradient edge cases") {
  CHECK_THROWS_AS(clip_gradient(flat({1.0}), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(clip_gradient(flat({1.0}), -1.0), std::invalid_argument);
  ParameterVector zero = flat({0, 0, 0});
  CHECK(clip_gradient(zero, 0.5).values == zero.values);  // pass-through
}

TEST_CASE("clip_gradient norm bound and direction, fuzzed") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = 1 + static_cast<int>(rng.uniform_index(256));
    ParameterVector g;
    g.values.resize(dim);
    for (int i = 0; i < dim; ++i) g.values[i] = rng.normal(0.0, 10.0);
    g.layout = {{0, dim}};
    const double c = 0.01 + rng.uniform() * 5.0;
    ParameterVector out = clip_gradient(g, c);
    CHECK(out.values.norm() <= c + 1e-12);
    // direction preserved
    if (g.values.norm() > 1e-9) {
      const double cosine = g.values.dot(out.values) / (g.values.norm() * out.values.norm());
      CHECK(cosine == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("add_gaussian_noise determinism and zero-noise identity") {
  ParameterVector g = flat({1, 2, 3});
  Rng rng(5);
  CHECK(add_gaussian_noise(g, 0.0, 1.0, rng).values == g.values);

  Rng r1(9), r2(9);
  ParameterVector a = add_gaussian_noise(g, 0.5, 2.0, r1);
  ParameterVector b = add_gaussian_noise(g, 0.5, 2.0, r2);
  CHECK(a.values == b.values);
  CHECK_THROWS_AS(add_gaussian_noise(g, -0.1, 1.0, rng), std::invalid_argument);
}

TEST_CASE("add_gaussian_noise empirical standard deviation") {
  const int n = 100000;
  ParameterVector g;
  g.values = Eigen::VectorXd::Zero(n);
  g.layout = {{0, n}};
  Rng rng(123);
  ParameterVector noisy = add_gaussian_noise(g, 1.0, 1.0, rng);
  const double mean = noisy.values.mean();
  const double var = (noisy.values.array() - mean).square().sum() / (n - 1);
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("calibrate_sigma matches the high-precision oracle") {
  // sqrt(2 ln(1.25/1e-5)) / 0.5, evaluated at 30 digits
  CHECK(calibrate_sigma(0.5, 1e-5, 1.0) ==
        doctest::Approx(9.68961052521077884).epsilon(1e-12));
  // inverse proportionality in epsilon, linearity in sensitivity
  CHECK(calibrate_sigma(1.0, 1e-5, 1.0) ==
        doctest::Approx(calibrate_sigma(0.5, 1e-5, 1.0) / 2.0));
  CHECK(calibrate_sigma(1.0, 1e-5, 2.0) ==
        doctest::Approx(2.0 * calibrate_sigma(1.0, 1e-5, 1.0)));
  CHECK_THROWS_AS(calibrate_sigma(0.0, 1e-5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_sigma(1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_sigma(1.0, 1e-5, 0.0), std::invalid_argument);
}

TEST_CASE("calibrate_sigma monotonicity") {
  double prev = calibrate_sigma(0.1, 1e-5, 1.0);
  for (double eps : {0.2, 0.4, 0.8, 1.6}) {
    const double cur = calibrate_sigma(eps, 1e-5, 1.0);
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK(calibrate_sigma(1.0, 1e-4, 1.0) < calibrate_sigma(1.0, 1e-5, 1.0));
}

TEST_CASE("dpgan_noise_scale matches the high-precision oracle") {
  // 2 * 0.01 * sqrt(5 ln(1e5)) / 1, evaluated at 30 digits
  CHECK(dpgan_noise_scale(0.01, 5, 1e-5, 1.0) ==
        doctest::Approx(0.151742712938514635).epsilon(1e-12));
  CHECK(dpgan_noise_scale(0.01, 5, 1e-5, 2.0) ==
        doctest::Approx(dpgan_noise_scale(0.01, 5, 1e-5, 1.0) / 2.0));
  CHECK_THROWS_AS(dpgan_noise_scale(0.0, 5, 1e-5, 1.0), std::invalid_argument);
}

TEST_CASE("dpgan_noise_scale monotonicity") {
  CHECK(dpgan_noise_scale(0.02, 5, 1e-5, 1.0) > dpgan_noise_scale(0.01, 5, 1e-5, 1.0));
  CHECK(dpgan_noise_scale(0.01, 6, 1e-5, 1.0) > dpgan_noise_scale(0.01, 5, 1e-5, 1.0));
  CHECK(dpgan_noise_scale(0.01, 5, 1e-4, 1.0) < dpgan_noise_scale(0.01, 5, 1e-5, 1.0));
}

TEST_CASE("check_dp_condition") {
  // 0.8 * exp(-(2*0.5)^2/2) = 0.48522... > 1e-5
  CHECK_FALSE(check_dp_condition(2.0, 0.5, 1e-5));
  CHECK(check_dp_condition(2.0, 0.5, 0.5));
  CHECK_FALSE(check_dp_condition(100.0, 1.5, 0.999));  // epsilon >= 1
}

TEST_CASE("privatize_gradient composition") {
  PrivacyParams p;
  p.sigma_n = 0.0;
  p.clip_threshold = 1.0;
  p.grad_sensitivity = 1.0;

  ParameterVector in_range = flat({0.3, 0.4});
  Rng rng(1);
  CHECK(privatize_gradient(in_range, p, rng).values == in_range.values);

  ParameterVector big = flat({6, 8});
  ParameterVector priv = privatize_gradient(big, p, rng);
  CHECK(priv.values == clip_gradient(big, 1.0).values);  // bitwise

  p.sigma_n = 0.5;
  Rng r1(4), r2(4);
  CHECK(privatize_gradient(big, p, r1).values == privatize_gradient(big, p, r2).values);
}
