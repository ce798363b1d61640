#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "recon/rng.hpp"

#include "json.hpp"

namespace recon::nn {

using Vec = std::vector<double>;

// Row-major dense matrix.
struct Mat {
  int rows = 0;
  int cols = 0;
  Vec data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

struct DenseLayer {
  Mat w;   // out x in
  Vec b;   // out
};

// Plain MLP: affine + tanh on hidden layers, affine on the output layer.
struct DenseNet {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }
  std::size_t param_count() const;

  // Mutable views over every parameter array, layer order, weights before bias.
  std::vector<std::span<double>> param_views();
  std::vector<std::span<const double>> param_views() const;
};

// Hidden layers get scaled-uniform init; the final layer starts at zero so an
// untrained net maps everything to the origin.
DenseNet make_net(const std::vector<int>& dims, Rng& rng, bool zero_final_layer = true);

// Forward pass, value only. Throws ContractViolation on dimension mismatch.
Vec forward(const DenseNet& net, std::span<const double> x);

// Shape-compatible zero clone, used as a gradient sink.
DenseNet zeros_like(const DenseNet& net);

void zero_out(DenseNet& net);

void accumulate_scaled(DenseNet& dst, const DenseNet& src, double k);

nlohmann::json net_to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& j);

}  // namespace recon::nn
