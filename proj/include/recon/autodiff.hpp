#pragma once

#include <span>

#include "recon/dense_net.hpp"

namespace recon::nn {

// Reverse-mode tape over vector-valued nodes. Covers exactly what the latent
// goal model needs: affine layers, tanh, concatenation, the reparameterized
// Gaussian sample, Gaussian log-density against a fixed target, KL to the
// standard normal, and scalar arithmetic for combining losses.
//
// Parameters are not tape nodes; an affine node carries pointers to its layer
// and to a caller-owned gradient sink, and backward() accumulates into the
// sink. Node slots are recycled across reset() so steady-state training does
// not allocate.
class Tape {
 public:
  using NodeId = int;

  // Drops all nodes but keeps slot storage for reuse.
  void reset();

  bool empty() const { return used_ == 0; }

  NodeId input(std::span<const double> v);
  NodeId affine(const DenseLayer& layer, DenseLayer* grad_sink, NodeId x);
  NodeId tanh_of(NodeId x);
  NodeId concat(NodeId a, NodeId b);
  NodeId slice(NodeId x, int offset, int len);
  // mu + exp(log_sigma) * noise
  NodeId reparameterize(NodeId mu, NodeId log_sigma, std::span<const double> noise);
  // scalar: sum_i log N(target_i; mu_i, exp(log_sigma_i))
  NodeId gaussian_log_prob(NodeId mu, NodeId log_sigma, std::span<const double> target);
  // scalar: KL(N(mu, diag exp(2 log_sigma)) || N(0, I))
  NodeId kl_to_standard_normal(NodeId mu, NodeId log_sigma);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId x, double k);
  NodeId dot(NodeId a, NodeId b);
  NodeId sum(NodeId x);

  // Reverse sweep from a scalar node. Accumulates parameter gradients into
  // the affine sinks and input gradients into grad(node).
  void backward(NodeId loss);

  const Vec& value(NodeId id) const;
  const Vec& grad(NodeId id) const;

 private:
  enum class Op {
    kInput,
    kAffine,
    kTanh,
    kConcat,
    kSlice,
    kReparam,
    kGaussLogProb,
    kKlStdNormal,
    kAdd,
    kSub,
    kScale,
    kDot,
    kSum,
  };

  struct Node {
    Op op{};
    NodeId a = -1;
    NodeId b = -1;
    const DenseLayer* layer = nullptr;
    DenseLayer* sink = nullptr;
    Vec aux;    // noise draws or log-prob target
    double k = 0.0;
    int offset = 0;
    Vec value;
    Vec grad;
  };

  Node& push(Op op);
  Node& node(NodeId id);
  const Node& node(NodeId id) const;
  void check_open(NodeId id) const;

  std::vector<Node> slots_;
  int used_ = 0;
};

}  // namespace recon::nn
