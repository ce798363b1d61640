#include "recon/diag_gaussian.hpp"

#include <cmath>

#include "recon/errors.hpp"

namespace recon::nn {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)
}

Vec DiagGaussian::sigma() const {
  Vec s(log_sigma.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(log_sigma[i]);
  return s;
}

DiagGaussian split_head(std::span<const double> head) {
  require(head.size() % 2 == 0, "split_head: head size must be even");
  const std::size_t d = head.size() / 2;
  DiagGaussian g;
  g.mu.assign(head.begin(), head.begin() + d);
  g.log_sigma.assign(head.begin() + d, head.end());
  return g;
}

double gaussian_log_prob(const DiagGaussian& dist, std::span<const double> x) {
  require(x.size() == dist.dim() && dist.log_sigma.size() == dist.dim(),
          "gaussian_log_prob: dimension mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = std::exp(dist.log_sigma[i]);
    require(s > 0.0, "gaussian_log_prob: non-positive sigma");
    const double z = (x[i] - dist.mu[i]) / s;
    lp += -kHalfLog2Pi - dist.log_sigma[i] - 0.5 * z * z;
  }
  return lp;
}

double kl_to_standard_normal(const DiagGaussian& dist) {
  require(dist.log_sigma.size() == dist.dim(), "kl_to_standard_normal: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < dist.dim(); ++i) {
    const double s2 = std::exp(2.0 * dist.log_sigma[i]);
    kl += dist.mu[i] * dist.mu[i] + s2 - 1.0 - 2.0 * dist.log_sigma[i];
  }
  return 0.5 * kl;
}

Vec reparameterize(const DiagGaussian& dist, std::span<const double> noise) {
  require(noise.size() == dist.dim(), "reparameterize: noise dimension mismatch");
  Vec z(dist.dim());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = dist.mu[i] + std::exp(dist.log_sigma[i]) * noise[i];
  return z;
}

}  // namespace recon::nn
