#pragma once

#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Parameters of the Gaussian differential-privacy mechanism applied to
// critic gradients, plus the critic weight-clip range.
struct PrivacyParams {
  double epsilon = 1.0;        // privacy budget
  double delta = 1e-5;         // failure probability
  double sigma_n = 1e-4;       // noise scale multiplier
  double clip_threshold = 1.0; // gradient L2 clip C
  double grad_sensitivity = 1.0;  // c_g; defaults to clip_threshold (clipping enforces it)
  double sample_rate = 0.01;   // q
  int n_d = 5;                 // critic iterations per generator step
  double weight_clip = 0.1;    // critic weights clamped to [-weight_clip, weight_clip]

  void validate() const;
};

// g * min(1, C / ||g||_2). Zero-norm gradients pass through unchanged.
ParameterVector clip_gradient(const ParameterVector& g, double clip_threshold);

// Adds independent N(0, (sigma_n * c_g)^2) noise per coordinate.
ParameterVector add_gaussian_noise(const ParameterVector& g, double sigma_n, double c_g,
                                   Rng& rng);

// Gaussian-mechanism noise bound sqrt(2 ln(1.25/delta)) * sensitivity / epsilon.
// Returns the infimum; callers needing a valid sigma must exceed it.
double calibrate_sigma(double epsilon, double delta, double sensitivity);

// Noise scale for the DP GAN critic: 2 q sqrt(n_d ln(1/delta)) / epsilon.
double dpgan_noise_scale(double q, int n_d, double delta, double epsilon);

// True iff delta >= (4/5) exp(-(sigma*epsilon)^2 / 2) and epsilon < 1.
bool check_dp_condition(double sigma, double epsilon, double delta);

// Clip then add noise, in that order.
ParameterVector privatize_gradient(const ParameterVector& g, const PrivacyParams& p, Rng& rng);

}  // namespace fedsim
