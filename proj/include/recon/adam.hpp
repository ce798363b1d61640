#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace recon::nn {

// Adam with bias correction over a fixed list of parameter arrays.
struct AdamState {
  std::int64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m;  // first moments, one entry per array
  std::vector<std::vector<double>> v;  // second moments
};

AdamState make_adam(std::span<const std::span<const double>> params, double lr);

// One update in place. Shapes must match the state the optimizer was built with.
void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads);

}  // namespace recon::nn
