#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recon/adam.hpp"
#include "recon/autodiff.hpp"
#include "recon/datagen.hpp"
#include "recon/dense_net.hpp"
#include "recon/diag_gaussian.hpp"
#include "recon/rng.hpp"

namespace recon::model {

// Context-conditioned latent goal model. The encoder maps (current, goal)
// observations to a Gaussian over a compact code z; the decoder maps
// (current, z) to a Gaussian over (v, w, distance-in-steps). The code is
// pulled toward a standard-normal prior by the beta-weighted KL term, which
// makes prior samples behave like nearby reachable goals and makes the prior
// density of an encoding a confidence score for reaching the encoded goal.
struct ModelParams {
  int obs_dim = 32;     // rays per observation
  int latent_dim = 16;  // D
  double beta = 1.0;
  nn::DenseNet encoder;  // 2K -> ... -> 2D (mu, log sigma)
  nn::DenseNet decoder;  // K + D -> ... -> 6 (mu, log sigma over (v, w, d))
  std::uint64_t init_seed = 0;
  std::int64_t train_step = 0;
};

enum class LatentOrigin { kPosteriorMean, kPosteriorSample, kPriorSample };

struct LatentGoal {
  nn::Vec z;
  LatentOrigin origin = LatentOrigin::kPosteriorMean;
};

struct ActionDistancePrediction {
  sim::Action action_mean;     // raw means; clamped at execution time
  double distance_mean = 0.0;  // timesteps, clamped >= 0
  nn::DiagGaussian dist;       // full 3-dim Gaussian over (v, w, d)
};

ModelParams make_model(int obs_dim, int latent_dim, double beta, std::uint64_t seed,
                       int hidden = 64);

nn::DiagGaussian encode(const ModelParams& p, const sim::Observation& o_t,
                        const sim::Observation& o_g);
ActionDistancePrediction decode(const ModelParams& p, const sim::Observation& o_t,
                                std::span<const double> z);

// Mean-path distance estimate d-bar, in control steps, clamped >= 0.
double predicted_distance(const ModelParams& p, const sim::Observation& o_t,
                          const sim::Observation& o_g);

// Per-dimension geometric-mean density of z under N(0, I). Dimension-free
// scale so one threshold works for any latent size.
double prior_geomean_density(std::span<const double> z);

// Goal is reachable-in-distribution when the geometric-mean prior density of
// the encoded mean exceeds epsilon.
bool feasibility(const ModelParams& p, const sim::Observation& o_t, const sim::Observation& o_g,
                 double epsilon);

LatentGoal sample_prior(int latent_dim, Rng& rng);

// Mean over the batch of [-log q(a,d | z, o) + beta * KL(p(z|o,g) || N(0,I))]
// with z reparameterized from the supplied standard-normal draws (one vector
// of size D per sample).
double vib_loss(const ModelParams& p, std::span<const data::Quadruple> batch,
                std::span<const nn::Vec> noise);

struct VibComponents {
  double nll = 0.0;
  double kl = 0.0;
};
VibComponents vib_components(const ModelParams& p, std::span<const data::Quadruple> batch,
                             std::span<const nn::Vec> noise);

struct ModelGrads {
  nn::DenseNet encoder;
  nn::DenseNet decoder;
};
ModelGrads zero_grads(const ModelParams& p);

// Loss and parameter gradients in one pass over the batch.
double vib_loss_backward(const ModelParams& p, std::span<const data::Quadruple> batch,
                         std::span<const nn::Vec> noise, nn::Tape& tape, ModelGrads& grads);

struct TrainOptions {
  int epochs = 1;
  int batch_size = 128;
  double lr = 1e-4;
  std::uint64_t seed = 0;
};

struct TrainTrace {
  std::vector<double> epoch_loss;
};

// Adam on the bottleneck loss with seeded shuffling. Pass a persistent
// optimizer to continue moments across calls (online fine-tuning); with
// nullptr a fresh optimizer is used. Throws TrainingDiverged on non-finite
// loss.
TrainTrace train(ModelParams& p, const data::Dataset& dataset, const TrainOptions& opts,
                 nn::AdamState* optimizer = nullptr);

void save_checkpoint(const ModelParams& p, const std::string& path,
                     const nlohmann::json& meta = nlohmann::json());
ModelParams load_checkpoint(const std::string& path);

}  // namespace recon::model
