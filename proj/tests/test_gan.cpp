#include <doctest.h>

#include <cmath>

#include "fedsim/gan.hpp"

using namespace fedsim;

namespace {

GanConfig toy_config(int data_dim = 4, int latent = 2, int hidden = 6) {
  GanConfig cfg;
  cfg.generator_spec.layers = {{latent, hidden, Activation::kTanh, false},
                               {hidden, data_dim, Activation::kIdentity, false}};
  cfg.critic_spec.layers = {{data_dim, hidden, Activation::kTanh, false},
                            {hidden, 1, Activation::kIdentity, false}};
  cfg.latent_dim = latent;
  cfg.batch_m = 4;
  cfg.privacy.sigma_n = 0.0;
  cfg.privacy.weight_clip = 0.5;
  return cfg;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("critic_loss arithmetic") {
  CHECK(critic_loss(vec({1, 1}), vec({0, 0})) == doctest::Approx(-1.0));
  CHECK(critic_loss(vec({0.5, 0.7}), vec({0.5, 0.7})) == doctest::Approx(0.0));
  CHECK(critic_loss(vec({2, 4}), vec({1, 1})) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(critic_loss(vec({}), vec({})), std::invalid_argument);
}

TEST_CASE("generator_loss arithmetic") {
  CHECK(generator_loss(vec({0, 0})) == doctest::Approx(0.0));
  CHECK(generator_loss(vec({1, 3})) == doctest::Approx(-2.0));
  // adding k to all fake scores lowers the loss by k
  CHECK(generator_loss(vec({1.5, 3.5})) ==
        doctest::Approx(generator_loss(vec({1, 3})) - 0.5));
  CHECK_THROWS_AS(generator_loss(vec({})), std::invalid_argument);
}

TEST_CASE("minimax_loss on confident discriminator") {
  // perfectly confident: log(1) + log(1 - 0) = 0
  CHECK(minimax_loss(vec({1.0}), vec({0.0})) == doctest::Approx(0.0));
  // maximally confused at 0.5: 2 log(0.5)
  CHECK(minimax_loss(vec({0.5}), vec({0.5})) == doctest::Approx(2.0 * std::log(0.5)));
}

TEST_CASE("clip_weights clamps coordinates") {
  ParameterVector p;
  p.values = vec({-5, 0.01, 5});
  p.layout = {{0, 3}};
  ParameterVector c = clip_weights(p, 0.1);
  CHECK(c.values[0] == doctest::Approx(-0.1));
  CHECK(c.values[1] == doctest::Approx(0.01));
  CHECK(c.values[2] == doctest::Approx(0.1));

  ParameterVector in_range;
  in_range.values = vec({-0.05, 0.0, 0.09});
  in_range.layout = {{0, 3}};
  CHECK(clip_weights(in_range, 0.1).values == in_range.values);
  CHECK(clip_weights(clip_weights(p, 0.1), 0.1).values == c.values);  // idempotent
  CHECK_THROWS_AS(clip_weights(p, 0.0), std::invalid_argument);
}

TEST_CASE("client_update with zero generator iterations is the identity") {
  GanConfig cfg = toy_config();
  cfg.n_g = 0;
  ParameterVector theta = init_params(cfg.generator_spec, 1);
  ParameterVector omega = init_params(cfg.critic_spec, 2);
  Eigen::MatrixXd data = Eigen::MatrixXd::Random(8, 4);
  Rng rng(3);
  ParameterVector out = client_update(theta, omega, data, cfg, rng);
  CHECK(out.values == theta.values);
}

TEST_CASE("client_update is deterministic per seed") {
  GanConfig cfg = toy_config();
  cfg.n_g = 3;
  cfg.privacy.sigma_n = 0.1;
  ParameterVector theta = init_params(cfg.generator_spec, 1);
  Eigen::MatrixXd data = Eigen::MatrixXd::Random(8, 4);

  ParameterVector o1 = init_params(cfg.critic_spec, 2);
  ParameterVector o2 = init_params(cfg.critic_spec, 2);
  Rng r1(3), r2(3);
  ParameterVector t1 = client_update(theta, o1, data, cfg, r1);
  ParameterVector t2 = client_update(theta, o2, data, cfg, r2);
  CHECK(t1.values == t2.values);
  CHECK(o1.values == o2.values);
}

TEST_CASE("client_update keeps critic weights inside the clip range") {
  Rng meta(77);
  for (int trial = 0; trial < 20; ++trial) {
    GanConfig cfg = toy_config();
    cfg.n_g = 2;
    cfg.alpha = 0.01 + meta.uniform() * 0.2;
    cfg.privacy.sigma_n = meta.uniform() * 0.5;
    cfg.privacy.weight_clip = 0.05 + meta.uniform() * 0.5;
    ParameterVector theta = init_params(cfg.generator_spec, meta.next_u64());
    ParameterVector omega = init_params(cfg.critic_spec, meta.next_u64());
    Eigen::MatrixXd data = Eigen::MatrixXd::Random(10, 4);
    Rng rng(meta.next_u64());
    client_update(theta, omega, data, cfg, rng);
    CHECK(omega.values.lpNorm<Eigen::Infinity>() <= cfg.privacy.weight_clip + 1e-15);
  }
}

TEST_CASE("client_update rejects empty shards") {
  GanConfig cfg = toy_config();
  ParameterVector theta = init_params(cfg.generator_spec, 1);
  ParameterVector omega = init_params(cfg.critic_spec, 2);
  Rng rng(1);
  CHECK_THROWS_AS(client_update(theta, omega, Eigen::MatrixXd(0, 4), cfg, rng),
                  std::invalid_argument);
}

TEST_CASE("per-example clipping bounds each contribution") {
  GanConfig cfg = toy_config();
  cfg.per_example_clip = true;
  cfg.privacy.clip_threshold = 0.01;  // aggressive, to make the effect visible
  cfg.n_g = 1;
  ParameterVector theta = init_params(cfg.generator_spec, 1);
  ParameterVector omega = init_params(cfg.critic_spec, 2);
  Eigen::MatrixXd data = Eigen::MatrixXd::Random(8, 4);
  Rng rng(5);
  ParameterVector out = client_update(theta, omega, data, cfg, rng);
  CHECK(out.values.allFinite());
  CHECK(omega.values.lpNorm<Eigen::Infinity>() <= cfg.privacy.weight_clip + 1e-15);
}

TEST_CASE("sample_generator determinism and degenerate generator") {
  GanConfig cfg = toy_config();
  ParameterVector theta = init_params(cfg.generator_spec, 9);
  Rng r1(4), r2(4);
  Eigen::MatrixXd a = sample_generator(theta, cfg, 5, r1);
  Eigen::MatrixXd b = sample_generator(theta, cfg, 5, r2);
  CHECK(a == b);
  CHECK(a.rows() == 5);
  CHECK(a.cols() == 4);

  Rng r3(4);
  CHECK_THROWS_AS(sample_generator(theta, cfg, 0, r3), std::invalid_argument);

  ParameterVector zero = zeros_like(cfg.generator_spec);
  Rng r4(4);
  CHECK(sample_generator(zero, cfg, 3, r4).isZero());
}

TEST_CASE("generator-backed augmentation extends the shard") {
  GanConfig cfg = toy_config();
  ParameterVector theta = init_params(cfg.generator_spec, 9);
  LabeledDataset ds = synth_dataset({4, 3, 2}, 4, 1);
  ClientShard shard{1, ds};
  Rng rng(8);
  ClientShard out = augment_with_fakes(shard, theta, cfg, 6, 2, rng);
  CHECK(out.n_k() == shard.n_k() + 6);
  CHECK(out.dataset.class_counts()[2] == shard.dataset.class_counts()[2] + 6);
}

TEST_CASE("generator gradient through the critic matches finite differences") {
  GanConfig cfg = toy_config();
  ParameterVector theta = init_params(cfg.generator_spec, 3);
  ParameterVector omega = init_params(cfg.critic_spec, 4);
  Rng rng(6);
  Eigen::MatrixXd z = sample_latent(cfg, 4, rng);

  ForwardTrace tr_gen = forward(cfg.generator_spec, theta, z);
  ForwardTrace tr_critic = forward(cfg.critic_spec, omega, tr_gen.output);
  const Eigen::MatrixXd dloss = Eigen::MatrixXd::Constant(4, 1, -1.0 / 4.0);
  Eigen::MatrixXd d_fake;
  backward(cfg.critic_spec, omega, tr_critic, dloss, &d_fake);
  ParameterVector analytic = backward(cfg.generator_spec, theta, tr_gen, d_fake);

  ParameterVector fd = finite_diff_grad(
      cfg.generator_spec, theta,
      [&](const ParameterVector& q) {
        Eigen::MatrixXd fake = forward(cfg.generator_spec, q, z).output;
        return generator_loss(forward(cfg.critic_spec, omega, fake).output.col(0));
      },
      1e-5);
  const double rel = (analytic.values - fd.values).norm() / fd.values.norm();
  CHECK(rel < 1e-5);
}
