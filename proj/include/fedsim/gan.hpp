#pragma once

#include "fedsim/data.hpp"
#include "fedsim/dp.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class LatentPrior { kStandardNormal, kUniform };

struct GanConfig {
  ModelSpec generator_spec;
  ModelSpec critic_spec;
  int latent_dim = 8;
  int n_g = 1;       // generator iterations per client update
  int n_d = 5;       // critic iterations per generator iteration
  int batch_m = 10;  // mini-batch size
  double alpha = 0.01;
  LatentPrior prior = LatentPrior::kStandardNormal;
  PrivacyParams privacy;
  // Per-example clipping clips each sample's critic gradient to C before
  // averaging; the default clips the mean batch gradient once.
  bool per_example_clip = false;

  void validate() const;
  int data_dim() const { return generator_spec.output_width(); }
};

// Kantorovich-dual critic surrogate: mean(critic(fake)) - mean(critic(real)).
double critic_loss(const Eigen::VectorXd& critic_out_real,
                   const Eigen::VectorXd& critic_out_fake);

// -mean(critic(fake)); the generator descends this.
double generator_loss(const Eigen::VectorXd& critic_out_fake);

// Original minimax GAN objective on discriminator probabilities:
// mean(log M(x)) + mean(log(1 - M(N(z)))). Provided as a standalone loss;
// training uses the critic surrogate above.
double minimax_loss(const Eigen::VectorXd& disc_prob_real,
                    const Eigen::VectorXd& disc_prob_fake);

// Clamp every coordinate to [-c, c].
ParameterVector clip_weights(const ParameterVector& params, double c);

struct ClientUpdateStats {
  std::vector<double> critic_losses;     // one per critic step
  std::vector<double> generator_losses;  // one per generator step
};

// Algorithm: for each of n_g generator iterations, run n_d critic steps
// (sample latent + data mini-batches, privatize the critic gradient, SGD
// update, clamp critic weights to [-weight_clip, weight_clip]); then take one
// generator step whose gradient receives only the L2 clip factor.
// The critic state `omega` is updated in place and stays with the client;
// only the generator parameters are returned.
ParameterVector client_update(const ParameterVector& theta, ParameterVector& omega,
                              const Eigen::MatrixXd& shard_samples, const GanConfig& cfg,
                              Rng& rng, ClientUpdateStats* stats = nullptr);

Eigen::MatrixXd sample_latent(const GanConfig& cfg, int n, Rng& rng);

// n generator outputs on independent latent draws; rows are samples.
Eigen::MatrixXd sample_generator(const ParameterVector& theta, const GanConfig& cfg, int n,
                                 Rng& rng);

// Generator-backed shard augmentation under `label`.
ClientShard augment_with_fakes(const ClientShard& shard, const ParameterVector& theta,
                               const GanConfig& cfg, int n_fake, int label, Rng& rng);

}  // namespace fedsim
