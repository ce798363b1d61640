#pragma once

#include <span>

#include "recon/dense_net.hpp"

namespace recon::nn {

// Diagonal Gaussian stored as (mu, log sigma). The exponential map keeps
// sigma strictly positive for any real log_sigma.
struct DiagGaussian {
  Vec mu;
  Vec log_sigma;

  std::size_t dim() const { return mu.size(); }
  Vec sigma() const;
};

// Split a network head of size 2D into (mu, log_sigma).
DiagGaussian split_head(std::span<const double> head);

// Sum over dims of log N(x_i; mu_i, sigma_i).
double gaussian_log_prob(const DiagGaussian& dist, std::span<const double> x);

// KL(dist || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - 2 log sigma). Always >= 0.
double kl_to_standard_normal(const DiagGaussian& dist);

// mu + sigma * noise, with caller-supplied standard-normal draws.
Vec reparameterize(const DiagGaussian& dist, std::span<const double> noise);

}  // namespace recon::nn
