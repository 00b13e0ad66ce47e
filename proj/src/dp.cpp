#include "fedsim/dp.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsim {

void PrivacyParams::validate() const {
  if (epsilon <= 0.0) throw std::invalid_argument("PrivacyParams: epsilon must be > 0");
  if (delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("PrivacyParams: delta must be in (0, 1)");
  if (sigma_n < 0.0) throw std::invalid_argument("PrivacyParams: sigma_n must be >= 0");
  if (clip_threshold <= 0.0)
    throw std::invalid_argument("PrivacyParams: clip_threshold must be > 0");
  if (grad_sensitivity <= 0.0)
    throw std::invalid_argument("PrivacyParams: grad_sensitivity must be > 0");
  if (sample_rate <= 0.0 || sample_rate > 1.0)
    throw std::invalid_argument("PrivacyParams: sample_rate must be in (0, 1]");
  if (n_d < 1) throw std::invalid_argument("PrivacyParams: n_d must be >= 1");
  if (weight_clip <= 0.0) throw std::invalid_argument("PrivacyParams: weight_clip must be > 0");
}

ParameterVector clip_gradient(const ParameterVector& g, double clip_threshold) {
  if (clip_threshold <= 0.0)
    throw std::invalid_argument("clip_gradient: clip threshold must be > 0");
  const double norm = g.values.norm();
  if (norm <= clip_threshold) return g;  // includes the zero-norm case
  ParameterVector out = g;
  out.values *= clip_threshold / norm;
  return out;
}

ParameterVector add_gaussian_noise(const ParameterVector& g, double sigma_n, double c_g,
                                   Rng& rng) {
  if (sigma_n < 0.0) throw std::invalid_argument("add_gaussian_noise: sigma_n must be >= 0");
  if (c_g <= 0.0) throw std::invalid_argument("add_gaussian_noise: c_g must be > 0");
  if (sigma_n == 0.0) return g;
  ParameterVector out = g;
  const double stddev = sigma_n * c_g;
  for (std::int64_t i = 0; i < out.values.size(); ++i) out.values[i] += rng.normal(0.0, stddev);
  return out;
}

double calibrate_sigma(double epsilon, double delta, double sensitivity) {
  if (epsilon <= 0.0) throw std::invalid_argument("calibrate_sigma: epsilon must be > 0");
  if (delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("calibrate_sigma: delta must be in (0, 1)");
  if (sensitivity <= 0.0)
    throw std::invalid_argument("calibrate_sigma: sensitivity must be > 0");
  return std::sqrt(2.0 * std::log(1.25 / delta)) * sensitivity / epsilon;
}

double dpgan_noise_scale(double q, int n_d, double delta, double epsilon) {
  if (q <= 0.0 || q > 1.0) throw std::invalid_argument("dpgan_noise_scale: q must be in (0, 1]");
  if (n_d < 1) throw std::invalid_argument("dpgan_noise_scale: n_d must be >= 1");
  if (delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("dpgan_noise_scale: delta must be in (0, 1)");
  if (epsilon <= 0.0) throw std::invalid_argument("dpgan_noise_scale: epsilon must be > 0");
  return 2.0 * q * std::sqrt(n_d * std::log(1.0 / delta)) / epsilon;
}

bool check_dp_condition(double sigma, double epsilon, double delta) {
  const double bound = 0.8 * std::exp(-(sigma * epsilon) * (sigma * epsilon) / 2.0);
  return delta >= bound && epsilon < 1.0;
}

ParameterVector privatize_gradient(const ParameterVector& g, const PrivacyParams& p, Rng& rng) {
  p.validate();
  ParameterVector clipped = clip_gradient(g, p.clip_threshold);
  return add_gaussian_noise(clipped, p.sigma_n, p.grad_sensitivity, rng);
}

}  // namespace fedsim
