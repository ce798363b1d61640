#include "recon/latent_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "recon/errors.hpp"

namespace recon::model {

using data::Quadruple;
using nn::DiagGaussian;
using nn::Vec;

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;

Vec concat_obs(const sim::Observation& a, const sim::Observation& b) {
  Vec v;
  v.reserve(a.rays.size() + b.rays.size());
  v.insert(v.end(), a.rays.begin(), a.rays.end());
  v.insert(v.end(), b.rays.begin(), b.rays.end());
  return v;
}

Vec target_of(const Quadruple& q) { return {q.a.v, q.a.w, static_cast<double>(q.d)}; }

std::vector<std::span<double>> all_param_views(ModelParams& p) {
  auto enc = p.encoder.param_views();
  auto dec = p.decoder.param_views();
  enc.insert(enc.end(), dec.begin(), dec.end());
  return enc;
}

std::vector<std::span<const double>> all_grad_views(const ModelGrads& g) {
  auto enc = g.encoder.param_views();
  auto dec = g.decoder.param_views();
  enc.insert(enc.end(), dec.begin(), dec.end());
  return enc;
}
}  // namespace

ModelParams make_model(int obs_dim, int latent_dim, double beta, std::uint64_t seed, int hidden) {
  require(obs_dim >= 1 && latent_dim >= 1 && hidden >= 1, "make_model: bad dimensions");
  require(beta >= 0.0, "make_model: beta must be >= 0");
  ModelParams p;
  p.obs_dim = obs_dim;
  p.latent_dim = latent_dim;
  p.beta = beta;
  p.init_seed = seed;
  Rng rng(derive_seed(seed, "model-init"));
  p.encoder = nn::make_net({2 * obs_dim, hidden, hidden, 2 * latent_dim}, rng);
  p.decoder = nn::make_net({obs_dim + latent_dim, hidden, hidden, 6}, rng);
  return p;
}

DiagGaussian encode(const ModelParams& p, const sim::Observation& o_t,
                    const sim::Observation& o_g) {
  require(static_cast<int>(o_t.rays.size()) == p.obs_dim &&
              static_cast<int>(o_g.rays.size()) == p.obs_dim,
          "encode: observation length mismatch");
  return nn::split_head(nn::forward(p.encoder, concat_obs(o_t, o_g)));
}

ActionDistancePrediction decode(const ModelParams& p, const sim::Observation& o_t,
                                std::span<const double> z) {
  require(static_cast<int>(o_t.rays.size()) == p.obs_dim, "decode: observation length mismatch");
  require(static_cast<int>(z.size()) == p.latent_dim, "decode: latent length mismatch");
  Vec in;
  in.reserve(o_t.rays.size() + z.size());
  in.insert(in.end(), o_t.rays.begin(), o_t.rays.end());
  in.insert(in.end(), z.begin(), z.end());
  ActionDistancePrediction pred;
  pred.dist = nn::split_head(nn::forward(p.decoder, in));
  pred.action_mean = {pred.dist.mu[0], pred.dist.mu[1]};
  pred.distance_mean = std::max(0.0, pred.dist.mu[2]);
  return pred;
}

double predicted_distance(const ModelParams& p, const sim::Observation& o_t,
                          const sim::Observation& o_g) {
  const DiagGaussian post = encode(p, o_t, o_g);
  return decode(p, o_t, post.mu).distance_mean;
}

double prior_geomean_density(std::span<const double> z) {
  if (z.empty()) return 0.0;
  double log_acc = 0.0;
  for (double zi : z) log_acc += -kHalfLog2Pi - 0.5 * zi * zi;
  return std::exp(log_acc / static_cast<double>(z.size()));
}

bool feasibility(const ModelParams& p, const sim::Observation& o_t, const sim::Observation& o_g,
                 double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, "feasibility: epsilon must lie in (0, 1)");
  const DiagGaussian post = encode(p, o_t, o_g);
  return prior_geomean_density(post.mu) > epsilon;
}

LatentGoal sample_prior(int latent_dim, Rng& rng) {
  return {rng.normal_vec(static_cast<std::size_t>(latent_dim)), LatentOrigin::kPriorSample};
}

namespace {
// Shared tape construction for one sample; returns the per-sample loss node.
nn::Tape::NodeId sample_loss_node(nn::Tape& tape, const ModelParams& p, const Quadruple& q,
                                  const Vec& eps, ModelGrads* grads, double* nll_out,
                                  double* kl_out) {
  const int d = p.latent_dim;
  auto enc_in = tape.input(concat_obs(q.o, q.g));
  nn::Tape::NodeId h = enc_in;
  const std::size_t ne = p.encoder.layers.size();
  for (std::size_t li = 0; li < ne; ++li) {
    h = tape.affine(p.encoder.layers[li], grads ? &grads->encoder.layers[li] : nullptr, h);
    if (li + 1 < ne) h = tape.tanh_of(h);
  }
  auto mu = tape.slice(h, 0, d);
  auto log_sigma = tape.slice(h, d, d);
  auto z = tape.reparameterize(mu, log_sigma, eps);

  auto dec_in = tape.concat(tape.input(q.o.rays), z);
  nn::Tape::NodeId g = dec_in;
  const std::size_t nd = p.decoder.layers.size();
  for (std::size_t li = 0; li < nd; ++li) {
    g = tape.affine(p.decoder.layers[li], grads ? &grads->decoder.layers[li] : nullptr, g);
    if (li + 1 < nd) g = tape.tanh_of(g);
  }
  auto q_mu = tape.slice(g, 0, 3);
  auto q_log_sigma = tape.slice(g, 3, 3);

  auto lp = tape.gaussian_log_prob(q_mu, q_log_sigma, target_of(q));
  auto kl = tape.kl_to_standard_normal(mu, log_sigma);
  if (nll_out) *nll_out = -tape.value(lp)[0];
  if (kl_out) *kl_out = tape.value(kl)[0];
  return tape.add(tape.scale(lp, -1.0), tape.scale(kl, p.beta));
}

nn::Tape::NodeId batch_loss_node(nn::Tape& tape, const ModelParams& p,
                                 std::span<const Quadruple> batch, std::span<const Vec> noise,
                                 ModelGrads* grads, VibComponents* comps) {
  require(!batch.empty(), "vib_loss: empty batch");
  require(noise.size() == batch.size(), "vib_loss: one noise draw needed per sample");
  nn::Tape::NodeId total = -1;
  double nll_sum = 0.0, kl_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    require(static_cast<int>(noise[i].size()) == p.latent_dim,
            "vib_loss: noise dimension mismatch");
    double nll_i = 0.0, kl_i = 0.0;
    auto li = sample_loss_node(tape, p, batch[i], noise[i], grads, &nll_i, &kl_i);
    nll_sum += nll_i;
    kl_sum += kl_i;
    total = (total < 0) ? li : tape.add(total, li);
  }
  if (comps) {
    comps->nll = nll_sum / static_cast<double>(batch.size());
    comps->kl = kl_sum / static_cast<double>(batch.size());
  }
  return tape.scale(total, 1.0 / static_cast<double>(batch.size()));
}
}  // namespace

double vib_loss(const ModelParams& p, std::span<const Quadruple> batch,
                std::span<const Vec> noise) {
  nn::Tape tape;
  return tape.value(batch_loss_node(tape, p, batch, noise, nullptr, nullptr))[0];
}

VibComponents vib_components(const ModelParams& p, std::span<const Quadruple> batch,
                             std::span<const Vec> noise) {
  nn::Tape tape;
  VibComponents comps;
  batch_loss_node(tape, p, batch, noise, nullptr, &comps);
  return comps;
}

ModelGrads zero_grads(const ModelParams& p) {
  return {nn::zeros_like(p.encoder), nn::zeros_like(p.decoder)};
}

double vib_loss_backward(const ModelParams& p, std::span<const Quadruple> batch,
                         std::span<const Vec> noise, nn::Tape& tape, ModelGrads& grads) {
  tape.reset();
  auto loss = batch_loss_node(tape, p, batch, noise, &grads, nullptr);
  tape.backward(loss);
  return tape.value(loss)[0];
}

TrainTrace train(ModelParams& p, const data::Dataset& dataset, const TrainOptions& opts,
                 nn::AdamState* optimizer) {
  require(!dataset.quads.empty(), "train: dataset is empty");
  require(opts.batch_size >= 1, "train: batch size must be >= 1");
  for (const auto& q : dataset.quads) {
    require(static_cast<int>(q.o.rays.size()) == p.obs_dim &&
                static_cast<int>(q.g.rays.size()) == p.obs_dim,
            "train: dataset ray length does not match model");
  }

  TrainTrace trace;
  Rng rng(derive_seed(opts.seed, "train"));

  nn::AdamState local;
  nn::AdamState* opt = optimizer;
  if (opt == nullptr) {
    auto views = const_cast<const ModelParams&>(p).encoder.param_views();
    auto dec = const_cast<const ModelParams&>(p).decoder.param_views();
    views.insert(views.end(), dec.begin(), dec.end());
    local = nn::make_adam(views, opts.lr);
    opt = &local;
  }
  opt->lr = opts.lr;

  std::vector<std::size_t> order(dataset.quads.size());
  std::iota(order.begin(), order.end(), 0);

  nn::Tape tape;
  ModelGrads grads = zero_grads(p);
  std::vector<Quadruple> batch;
  std::vector<Vec> noise;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    long batches = 0;
    for (std::size_t at = 0; at < order.size(); at += opts.batch_size) {
      const std::size_t hi = std::min(order.size(), at + opts.batch_size);
      batch.clear();
      noise.clear();
      for (std::size_t i = at; i < hi; ++i) {
        batch.push_back(dataset.quads[order[i]]);
        noise.push_back(rng.normal_vec(static_cast<std::size_t>(p.latent_dim)));
      }
      nn::zero_out(grads.encoder);
      nn::zero_out(grads.decoder);
      const double loss = vib_loss_backward(p, batch, noise, tape, grads);
      if (!std::isfinite(loss))
        throw TrainingDiverged("train: non-finite loss at epoch " + std::to_string(epoch) +
                               ", step " + std::to_string(p.train_step));
      loss_sum += loss;
      ++batches;

      auto pviews = all_param_views(p);
      auto gviews = all_grad_views(grads);
      nn::adam_step(*opt, pviews, gviews);
      p.train_step += 1;
    }
    trace.epoch_loss.push_back(loss_sum / std::max(1L, batches));
  }
  return trace;
}

void save_checkpoint(const ModelParams& p, const std::string& path, const nlohmann::json& meta) {
  nlohmann::json j = {
      {"format", "recon-ckpt-1"},
      {"obs_dim", p.obs_dim},
      {"latent_dim", p.latent_dim},
      {"beta", p.beta},
      {"init_seed", p.init_seed},
      {"train_step", p.train_step},
      {"encoder", nn::net_to_json(p.encoder)},
      {"decoder", nn::net_to_json(p.decoder)},
  };
  if (!meta.is_null()) j["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw IoError("save_checkpoint: cannot open " + path);
  out << j.dump() << "\n";
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_checkpoint: bad JSON in " + path + ": " + e.what());
  }
  if (j.value("format", "") != "recon-ckpt-1")
    throw IoError("load_checkpoint: unknown checkpoint format in " + path);
  ModelParams p;
  p.obs_dim = j.at("obs_dim").get<int>();
  p.latent_dim = j.at("latent_dim").get<int>();
  p.beta = j.at("beta").get<double>();
  p.init_seed = j.at("init_seed").get<std::uint64_t>();
  p.train_step = j.at("train_step").get<std::int64_t>();
  p.encoder = nn::net_from_json(j.at("encoder"));
  p.decoder = nn::net_from_json(j.at("decoder"));
  if (p.encoder.input_dim() != 2 * p.obs_dim || p.encoder.output_dim() != 2 * p.latent_dim ||
      p.decoder.input_dim() != p.obs_dim + p.latent_dim || p.decoder.output_dim() != 6)
    throw IoError("load_checkpoint: network shapes inconsistent with metadata in " + path);
  return p;
}

}  // namespace recon::model
