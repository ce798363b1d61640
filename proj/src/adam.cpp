#include "recon/adam.hpp"

#include <cmath>

#include "recon/errors.hpp"

namespace recon::nn {

AdamState make_adam(std::span<const std::span<const double>> params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads) {
  require(params.size() == state.m.size() && grads.size() == state.m.size(),
          "adam_step: parameter group count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t gi = 0; gi < params.size(); ++gi) {
    auto p = params[gi];
    auto g = grads[gi];
    auto& m = state.m[gi];
    auto& v = state.v[gi];
    require(p.size() == m.size() && g.size() == m.size(), "adam_step: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace recon::nn
