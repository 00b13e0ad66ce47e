#include "fedsim/gan.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsim {

namespace {

Eigen::MatrixXd sample_data_batch(const Eigen::MatrixXd& samples, int m, Rng& rng) {
  Eigen::MatrixXd batch(m, samples.cols());
  for (int i = 0; i < m; ++i)
    batch.row(i) = samples.row(static_cast<int>(rng.uniform_index(samples.rows())));
  return batch;
}

// Gradient of critic_loss w.r.t. the critic parameters on one (real, fake) batch.
ParameterVector critic_param_grad(const GanConfig& cfg, const ParameterVector& omega,
                                  const Eigen::MatrixXd& real, const Eigen::MatrixXd& fake,
                                  double* loss_out) {
  const int m = static_cast<int>(real.rows());
  ForwardTrace tr_real = forward(cfg.critic_spec, omega, real);
  ForwardTrace tr_fake = forward(cfg.critic_spec, omega, fake);
  if (loss_out) *loss_out = critic_loss(tr_real.output.col(0), tr_fake.output.col(0));
  const Eigen::MatrixXd g_real = Eigen::MatrixXd::Constant(m, 1, -1.0 / m);
  const Eigen::MatrixXd g_fake = Eigen::MatrixXd::Constant(m, 1, 1.0 / m);
  ParameterVector grad = backward(cfg.critic_spec, omega, tr_real, g_real);
  grad.values += backward(cfg.critic_spec, omega, tr_fake, g_fake).values;
  return grad;
}

// Per-example variant: clip each sample pair's gradient to C, then average.
ParameterVector critic_param_grad_per_example(const GanConfig& cfg,
                                              const ParameterVector& omega,
                                              const Eigen::MatrixXd& real,
                                              const Eigen::MatrixXd& fake, double* loss_out) {
  const int m = static_cast<int>(real.rows());
  ParameterVector acc = zeros_like(cfg.critic_spec);
  double loss_sum = 0.0;
  for (int i = 0; i < m; ++i) {
    double loss_i = 0.0;
    ParameterVector g = critic_param_grad(cfg, omega, real.row(i), fake.row(i), &loss_i);
    loss_sum += loss_i;
    acc.values += clip_gradient(g, cfg.privacy.clip_threshold).values;
  }
  acc.values /= m;
  if (loss_out) *loss_out = loss_sum / m;
  return acc;
}

}  // namespace

void GanConfig::validate() const {
  generator_spec.validate();
  critic_spec.validate();
  if (latent_dim != generator_spec.input_width())
    throw std::invalid_argument("GanConfig: latent_dim must equal generator input width");
  if (generator_spec.output_width() != critic_spec.input_width())
    throw std::invalid_argument("GanConfig: generator output width must equal critic input");
  if (critic_spec.output_width() != 1)
    throw std::invalid_argument("GanConfig: critic must output a single score");
  if (n_g < 0) throw std::invalid_argument("GanConfig: n_g must be >= 0");
  if (n_d < 1) throw std::invalid_argument("GanConfig: n_d must be >= 1");
  if (batch_m < 1) throw std::invalid_argument("GanConfig: batch_m must be >= 1");
  if (alpha <= 0.0) throw std::invalid_argument("GanConfig: alpha must be > 0");
  privacy.validate();
}

double critic_loss(const Eigen::VectorXd& critic_out_real,
                   const Eigen::VectorXd& critic_out_fake) {
  if (critic_out_real.size() == 0 || critic_out_real.size() != critic_out_fake.size())
    throw std::invalid_argument("critic_loss: need equal-length non-empty score vectors");
  return critic_out_fake.mean() - critic_out_real.mean();
}

double generator_loss(const Eigen::VectorXd& critic_out_fake) {
  if (critic_out_fake.size() == 0)
    throw std::invalid_argument("generator_loss: empty score vector");
  return -critic_out_fake.mean();
}

double minimax_loss(const Eigen::VectorXd& disc_prob_real,
                    const Eigen::VectorXd& disc_prob_fake) {
  if (disc_prob_real.size() == 0 || disc_prob_fake.size() == 0)
    throw std::invalid_argument("minimax_loss: empty score vector");
  return disc_prob_real.array().log().mean() + (1.0 - disc_prob_fake.array()).log().mean();
}

ParameterVector clip_weights(const ParameterVector& params, double c) {
  if (c <= 0.0) throw std::invalid_argument("clip_weights: c must be > 0");
  ParameterVector out = params;
  out.values = out.values.cwiseMax(-c).cwiseMin(c);
  return out;
}

Eigen::MatrixXd sample_latent(const GanConfig& cfg, int n, Rng& rng) {
  Eigen::MatrixXd z(n, cfg.latent_dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < cfg.latent_dim; ++j)
      z(i, j) = cfg.prior == LatentPrior::kStandardNormal ? rng.normal()
                                                          : rng.uniform(-1.0, 1.0);
  return z;
}

ParameterVector client_update(const ParameterVector& theta, ParameterVector& omega,
                              const Eigen::MatrixXd& shard_samples, const GanConfig& cfg,
                              Rng& rng, ClientUpdateStats* stats) {
  cfg.validate();
  if (shard_samples.rows() == 0) throw std::invalid_argument("client_update: empty shard");
  if (shard_samples.cols() != cfg.data_dim())
    throw std::invalid_argument("client_update: shard dimension mismatch");

  ParameterVector gen = theta;
  for (int t1 = 0; t1 < cfg.n_g; ++t1) {
    for (int t2 = 0; t2 < cfg.n_d; ++t2) {
      Eigen::MatrixXd z = sample_latent(cfg, cfg.batch_m, rng);
      Eigen::MatrixXd real = sample_data_batch(shard_samples, cfg.batch_m, rng);
      Eigen::MatrixXd fake = forward(cfg.generator_spec, gen, z).output;

      double loss = 0.0;
      ParameterVector g =
          cfg.per_example_clip
              ? critic_param_grad_per_example(cfg, omega, real, fake, &loss)
              : privatize_gradient(critic_param_grad(cfg, omega, real, fake, &loss),
                                   cfg.privacy, rng);
      if (cfg.per_example_clip)
        g = add_gaussian_noise(g, cfg.privacy.sigma_n, cfg.privacy.grad_sensitivity, rng);

      omega = clip_weights(sgd_step(omega, g, cfg.alpha), cfg.privacy.weight_clip);
      if (stats) stats->critic_losses.push_back(loss);
    }

    // Generator step: gradient receives the clip factor but no noise.
    Eigen::MatrixXd z = sample_latent(cfg, cfg.batch_m, rng);
    ForwardTrace tr_gen = forward(cfg.generator_spec, gen, z);
    ForwardTrace tr_critic = forward(cfg.critic_spec, omega, tr_gen.output);
    const double g_loss = generator_loss(tr_critic.output.col(0));

    const Eigen::MatrixXd dloss =
        Eigen::MatrixXd::Constant(cfg.batch_m, 1, -1.0 / cfg.batch_m);
    Eigen::MatrixXd d_fake;  // dLoss/d(generator output), via the critic
    backward(cfg.critic_spec, omega, tr_critic, dloss, &d_fake);
    ParameterVector g_theta = backward(cfg.generator_spec, gen, tr_gen, d_fake);
    g_theta = clip_gradient(g_theta, cfg.privacy.clip_threshold);
    gen = sgd_step(gen, g_theta, cfg.alpha);
    if (stats) stats->generator_losses.push_back(g_loss);
  }
  return gen;
}

Eigen::MatrixXd sample_generator(const ParameterVector& theta, const GanConfig& cfg, int n,
                                 Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_generator: n must be >= 1");
  Eigen::MatrixXd z = sample_latent(cfg, n, rng);
  return forward(cfg.generator_spec, theta, z).output;
}

ClientShard augment_with_fakes(const ClientShard& shard, const ParameterVector& theta,
                               const GanConfig& cfg, int n_fake, int label, Rng& rng) {
  if (n_fake < 0) throw std::invalid_argument("augment_with_fakes: n_fake must be >= 0");
  if (n_fake == 0) return shard;
  Eigen::MatrixXd fakes = sample_generator(theta, cfg, n_fake, rng);
  return augment_with_fakes(shard, fakes, label);
}

}  // namespace fedsim
