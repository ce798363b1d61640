#include <cmath>
#include <vector>

#include "recon/adam.hpp"
#include "recon/autodiff.hpp"
#include "recon/dense_net.hpp"
#include "recon/diag_gaussian.hpp"
#include "recon/errors.hpp"
#include "recon/rng.hpp"

#include "doctest.h"

using namespace recon;
using nn::DenseLayer;
using nn::DenseNet;
using nn::DiagGaussian;
using nn::Mat;
using nn::Tape;
using nn::Vec;

TEST_CASE("forward: identity layer") {
  DenseNet net;
  DenseLayer l;
  l.w = Mat(2, 2);
  l.w.at(0, 0) = 1.0;
  l.w.at(1, 1) = 1.0;
  l.b = {0.0, 0.0};
  net.layers.push_back(l);
  const Vec y = nn::forward(net, Vec{1.0, 2.0});
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
}

TEST_CASE("forward: constant map") {
  DenseNet net;
  DenseLayer l;
  l.w = Mat(2, 3);
  l.b = {3.0, 3.0};
  net.layers.push_back(l);
  const Vec y = nn::forward(net, Vec{-7.0, 0.4, 123.0});
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 3.0);
}

TEST_CASE("forward: seeded 2-layer net matches straight-line recomputation") {
  Rng rng(42);
  const DenseNet net = nn::make_net({2, 3, 2}, rng, /*zero_final_layer=*/false);
  const Vec x{0.5, -0.5};
  const Vec y = nn::forward(net, x);

  // Same arithmetic, written out by hand.
  double h[3];
  for (int o = 0; o < 3; ++o) {
    double acc = net.layers[0].b[o];
    for (int i = 0; i < 2; ++i) acc += net.layers[0].w.at(o, i) * x[i];
    h[o] = std::tanh(acc);
  }
  for (int o = 0; o < 2; ++o) {
    double acc = net.layers[1].b[o];
    for (int i = 0; i < 3; ++i) acc += net.layers[1].w.at(o, i) * h[i];
    CHECK(y[o] == doctest::Approx(acc).epsilon(1e-15));
  }
}

TEST_CASE("forward: dimension mismatch throws") {
  Rng rng(1);
  const DenseNet net = nn::make_net({3, 2}, rng);
  CHECK_THROWS_AS(nn::forward(net, Vec{1.0, 2.0}), ContractViolation);
}

TEST_CASE("gaussian_log_prob: at the mean with unit sigma") {
  DiagGaussian g{{0.7}, {0.0}};
  CHECK(nn::gaussian_log_prob(g, Vec{0.7}) == doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  DiagGaussian g2{{0.0, -1.0}, {0.0, 0.0}};
  CHECK(nn::gaussian_log_prob(g2, Vec{0.0, -1.0}) ==
        doctest::Approx(-1.8378770664093453).epsilon(1e-12));
}

TEST_CASE("gaussian_log_prob: quadrature normalization oracle") {
  // mu=0, sigma=2: the density built from gaussian_log_prob must integrate
  // to 1, and the value at x=2 must match the hand-expanded formula.
  DiagGaussian g{{0.0}, {std::log(2.0)}};
  const double lo = -16.0, hi = 16.0;
  const int n = 200000;
  const double dx = (hi - lo) / n;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * dx;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    integral += w * std::exp(nn::gaussian_log_prob(g, Vec{x}));
  }
  integral *= dx;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-8));
  // -0.5*ln(2*pi) - ln(2) - (2-0)^2 / (2*4)
  const double expected = -0.9189385332046727 - 0.6931471805599453 - 0.5;
  CHECK(nn::gaussian_log_prob(g, Vec{2.0}) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gaussian_log_prob: maximized at the mean") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    DiagGaussian g;
    const int d = 1 + static_cast<int>(rng.below(5));
    for (int i = 0; i < d; ++i) {
      g.mu.push_back(rng.uniform(-3, 3));
      g.log_sigma.push_back(rng.uniform(-1.5, 1.5));
    }
    const double at_mean = nn::gaussian_log_prob(g, g.mu);
    Vec x = g.mu;
    x[static_cast<std::size_t>(rng.below(d))] += rng.uniform(0.01, 2.0);
    CHECK(nn::gaussian_log_prob(g, x) < at_mean);
  }
}

TEST_CASE("kl_to_standard_normal: exact cases") {
  CHECK(nn::kl_to_standard_normal({{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}) == 0.0);
  CHECK(nn::kl_to_standard_normal({{1.0, 0.0}, {0.0, 0.0}}) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("kl_to_standard_normal: Monte-Carlo oracle, D=4") {
  Rng rng(123);
  DiagGaussian g;
  for (int i = 0; i < 4; ++i) {
    g.mu.push_back(rng.uniform(-2, 2));
    g.log_sigma.push_back(rng.uniform(-1, 1));
  }
  const double closed = nn::kl_to_standard_normal(g);

  // Straight-line densities, independent of the library code.
  auto logp = [&](const Vec& x) {
    double acc = 0;
    for (int i = 0; i < 4; ++i) {
      const double s = std::exp(g.log_sigma[i]);
      const double z = (x[i] - g.mu[i]) / s;
      acc += -0.9189385332046727 - g.log_sigma[i] - 0.5 * z * z;
    }
    return acc;
  };
  auto logr = [](const Vec& x) {
    double acc = 0;
    for (double xi : x) acc += -0.9189385332046727 - 0.5 * xi * xi;
    return acc;
  };

  const int n = 100000;
  double mean = 0, m2 = 0;
  for (int k = 1; k <= n; ++k) {
    Vec x(4);
    for (int i = 0; i < 4; ++i) x[i] = g.mu[i] + std::exp(g.log_sigma[i]) * rng.normal();
    const double v = logp(x) - logr(x);
    const double delta = v - mean;
    mean += delta / k;
    m2 += delta * (v - mean);
  }
  const double se = std::sqrt(m2 / (n - 1) / n);
  CHECK(std::abs(closed - mean) < 3.0 * se);
}

TEST_CASE("kl_to_standard_normal: nonnegative, zero only at the prior") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    DiagGaussian g;
    const int d = 1 + static_cast<int>(rng.below(8));
    bool is_prior = true;
    for (int i = 0; i < d; ++i) {
      g.mu.push_back(rng.uniform(-2, 2));
      g.log_sigma.push_back(rng.uniform(-1, 1));
      if (g.mu.back() != 0.0 || g.log_sigma.back() != 0.0) is_prior = false;
    }
    const double kl = nn::kl_to_standard_normal(g);
    CHECK(kl >= 0.0);
    if (!is_prior) CHECK(kl > 0.0);
  }
}

TEST_CASE("reparameterize") {
  DiagGaussian g{{1.0, -2.0}, {0.5, 0.25}};
  const Vec at_zero = nn::reparameterize(g, Vec{0.0, 0.0});
  CHECK(at_zero[0] == 1.0);
  CHECK(at_zero[1] == -2.0);

  DiagGaussian tiny{{3.0}, {std::log(1e-12)}};
  CHECK(nn::reparameterize(tiny, Vec{57.0})[0] == doctest::Approx(3.0).epsilon(1e-9));

  DiagGaussian g2{{0.0, 0.0}, {std::log(2.0), std::log(3.0)}};
  const Vec z = nn::reparameterize(g2, Vec{1.0, -1.0});
  CHECK(z[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(-3.0).epsilon(1e-15));
}

TEST_CASE("backward: gradient of half squared norm is x") {
  Tape tape;
  const Vec x{1.5, -2.0, 0.25};
  auto xid = tape.input(x);
  auto loss = tape.scale(tape.dot(xid, xid), 0.5);
  tape.backward(loss);
  for (int i = 0; i < 3; ++i) CHECK(tape.grad(xid)[i] == doctest::Approx(x[i]).epsilon(1e-15));
}

TEST_CASE("backward: before any forward pass is a contract violation") {
  Tape tape;
  CHECK_THROWS_AS(tape.backward(0), ContractViolation);
}

TEST_CASE("backward: linear layer squared error matches closed-form gradient") {
  Rng rng(9);
  DenseLayer l;
  l.w = Mat(2, 3);
  for (auto& v : l.w.data) v = rng.uniform(-1, 1);
  l.b = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  DenseLayer sink;
  sink.w = Mat(2, 3);
  sink.b = Vec(2, 0.0);

  const Vec x{0.3, -0.7, 1.1};
  const Vec t{0.5, -0.25};

  Tape tape;
  auto xid = tape.input(x);
  auto y = tape.affine(l, &sink, xid);
  auto diff = tape.sub(y, tape.input(t));
  auto loss = tape.scale(tape.dot(diff, diff), 0.5);
  tape.backward(loss);

  // Closed form: dW = (y - t) x^T, db = y - t, dx = W^T (y - t).
  Vec yv(2);
  for (int o = 0; o < 2; ++o) {
    yv[o] = l.b[o];
    for (int i = 0; i < 3; ++i) yv[o] += l.w.at(o, i) * x[i];
  }
  for (int o = 0; o < 2; ++o) {
    const double r = yv[o] - t[o];
    CHECK(sink.b[o] == doctest::Approx(r).epsilon(1e-12));
    for (int i = 0; i < 3; ++i)
      CHECK(sink.w.at(o, i) == doctest::Approx(r * x[i]).epsilon(1e-12));
  }
  for (int i = 0; i < 3; ++i) {
    double dx = 0;
    for (int o = 0; o < 2; ++o) dx += l.w.at(o, i) * (yv[o] - t[o]);
    CHECK(tape.grad(xid)[i] == doctest::Approx(dx).epsilon(1e-12));
  }
}

namespace {

// Loss used by the finite-difference oracle: a miniature of the full
// training objective, exercising every tape op.
double toy_loss(const DenseNet& enc, const DenseNet& dec, const Vec& x, const Vec& noise,
                const Vec& target, double beta, DenseNet* genc = nullptr,
                DenseNet* gdec = nullptr) {
  Tape tape;
  auto h = tape.input(x);
  for (std::size_t li = 0; li < enc.layers.size(); ++li) {
    h = tape.affine(enc.layers[li], genc ? &genc->layers[li] : nullptr, h);
    if (li + 1 < enc.layers.size()) h = tape.tanh_of(h);
  }
  const int d = enc.output_dim() / 2;
  auto mu = tape.slice(h, 0, d);
  auto ls = tape.slice(h, d, d);
  auto z = tape.reparameterize(mu, ls, noise);
  auto g = tape.concat(tape.input(Vec(x.begin(), x.begin() + 2)), z);
  for (std::size_t li = 0; li < dec.layers.size(); ++li) {
    g = tape.affine(dec.layers[li], gdec ? &gdec->layers[li] : nullptr, g);
    if (li + 1 < dec.layers.size()) g = tape.tanh_of(g);
  }
  const int od = dec.output_dim() / 2;
  auto qmu = tape.slice(g, 0, od);
  auto qls = tape.slice(g, od, od);
  auto lp = tape.gaussian_log_prob(qmu, qls, target);
  auto kl = tape.kl_to_standard_normal(mu, ls);
  auto loss = tape.add(tape.scale(lp, -1.0), tape.scale(kl, beta));
  if (genc) tape.backward(loss);
  return tape.value(loss)[0];
}

}  // namespace

TEST_CASE("backward: full bottleneck-style loss matches central finite differences") {
  Rng rng(31);
  DenseNet enc = nn::make_net({4, 6, 6}, rng, false);  // D = 3
  DenseNet dec = nn::make_net({5, 6, 4}, rng, false);  // out dim 4 -> 2-dim head
  const Vec x{0.2, -0.4, 0.8, 0.1};
  const Vec noise{0.3, -1.1, 0.7};
  const Vec target{0.25, -0.5};
  const double beta = 0.7;

  DenseNet genc = nn::zeros_like(enc);
  DenseNet gdec = nn::zeros_like(dec);
  toy_loss(enc, dec, x, noise, target, beta, &genc, &gdec);

  const double h = 1e-5;
  auto check_block = [&](DenseNet& net, const DenseNet& grads) {
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      auto probe = [&](std::vector<double>& arr, const std::vector<double>& garr) {
        for (std::size_t i = 0; i < arr.size(); ++i) {
          const double keep = arr[i];
          arr[i] = keep + h;
          const double up = toy_loss(enc, dec, x, noise, target, beta);
          arr[i] = keep - h;
          const double dn = toy_loss(enc, dec, x, noise, target, beta);
          arr[i] = keep;
          const double fd = (up - dn) / (2 * h);
          const double err = std::abs(fd - garr[i]);
          const double rel = err / std::max(1e-6, std::abs(fd));
          CHECK(rel < 1e-4);
        }
      };
      probe(net.layers[li].w.data, grads.layers[li].w.data);
      probe(net.layers[li].b, grads.layers[li].b);
    }
  };
  check_block(enc, genc);
  check_block(dec, gdec);
}

TEST_CASE("adam: zero gradients leave parameters unchanged, moments decay") {
  Vec p{1.0, -2.0};
  Vec g{0.0, 0.0};
  std::vector<std::span<const double>> pv{std::span<const double>(p)};
  auto state = nn::make_adam(pv, 0.1);
  state.m[0] = {0.5, 0.5};
  state.v[0] = {0.25, 0.25};
  const Vec before = p;
  for (int i = 0; i < 20; ++i) {
    std::vector<std::span<double>> pw{std::span<double>(p)};
    std::vector<std::span<const double>> gw{std::span<const double>(g)};
    nn::adam_step(state, pw, gw);
  }
  // The moment estimates decay geometrically, and the mhat/vhat ratio stays
  // bounded so updates stay tiny relative to lr.
  CHECK(state.m[0][0] == doctest::Approx(0.5 * std::pow(0.9, 20)).epsilon(1e-12));
  CHECK(std::abs(p[0] - before[0]) < 0.1 * 20 + 1e-9);
  CHECK(state.step == 20);
}

TEST_CASE("adam: zero moments and zero grad leave parameters bit-identical") {
  Vec p{0.7};
  Vec g{0.0};
  std::vector<std::span<const double>> pv{std::span<const double>(p)};
  auto state = nn::make_adam(pv, 0.1);
  std::vector<std::span<double>> pw{std::span<double>(p)};
  std::vector<std::span<const double>> gw{std::span<const double>(g)};
  nn::adam_step(state, pw, gw);
  CHECK(p[0] == 0.7);
}

TEST_CASE("adam: first step moves by about lr against the gradient sign") {
  for (double g0 : {2.5, -0.3, 10.0}) {
    Vec p{1.0};
    Vec g{g0};
    std::vector<std::span<const double>> pv{std::span<const double>(p)};
    auto state = nn::make_adam(pv, 1e-3);
    std::vector<std::span<double>> pw{std::span<double>(p)};
    std::vector<std::span<const double>> gw{std::span<const double>(g)};
    nn::adam_step(state, pw, gw);
    const double moved = p[0] - 1.0;
    CHECK(moved * g0 < 0);
    CHECK(std::abs(moved) == doctest::Approx(1e-3).epsilon(1e-4));
  }
}

TEST_CASE("adam: converges on (w-3)^2 from w=0") {
  Vec w{0.0};
  std::vector<std::span<const double>> pv{std::span<const double>(w)};
  auto state = nn::make_adam(pv, 0.1);
  std::vector<double> dist;
  for (int i = 0; i < 100; ++i) {
    Vec g{2.0 * (w[0] - 3.0)};
    std::vector<std::span<double>> pw{std::span<double>(w)};
    std::vector<std::span<const double>> gw{std::span<const double>(g)};
    nn::adam_step(state, pw, gw);
    dist.push_back(std::abs(w[0] - 3.0));
  }
  // Far from the optimum the step is ~lr toward it, so the gap shrinks
  // monotonically through the approach phase, and ends near zero.
  for (int i = 1; i < 25; ++i) CHECK(dist[i] < dist[i - 1]);
  CHECK(dist.back() < 0.3);
}

TEST_CASE("determinism: same seed gives bit-identical nets and forwards") {
  Rng r1(77), r2(77);
  const DenseNet a = nn::make_net({4, 8, 3}, r1, false);
  const DenseNet b = nn::make_net({4, 8, 3}, r2, false);
  for (std::size_t li = 0; li < a.layers.size(); ++li) {
    CHECK(a.layers[li].w.data == b.layers[li].w.data);
    CHECK(a.layers[li].b == b.layers[li].b);
  }
  const Vec x{0.1, 0.2, 0.3, 0.4};
  CHECK(nn::forward(a, x) == nn::forward(b, x));
}

TEST_CASE("checkpoint json round-trips bit-exactly") {
  Rng rng(2024);
  const DenseNet net = nn::make_net({3, 5, 2}, rng, false);
  const auto j = nn::net_to_json(net);
  const DenseNet back = nn::net_from_json(nlohmann::json::parse(j.dump()));
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    CHECK(net.layers[li].w.data == back.layers[li].w.data);
    CHECK(net.layers[li].b == back.layers[li].b);
  }
}
