#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recon/agent.hpp"
#include "recon/latent_model.hpp"
#include "recon/world.hpp"

#include "json.hpp"

namespace recon::eval {

enum class Method { kRecon, kReactive, kRandomActions, kVanilla };
Method method_from_string(const std::string& name);
std::string method_name(Method m);

struct RunReport {
  std::string method;
  std::uint64_t seed = 0;
  std::string world_id;
  bool discovered = false;
  long exploration_steps = 0;
  bool nav_attempted = false;
  bool nav_success = false;
  long navigation_steps = 0;
  double sct = 0.0;
  std::vector<std::pair<long, double>> coverage_trace;  // (step, fraction)
  std::vector<std::pair<std::string, long>> branch_histogram;
};

// Fraction of free space within `radius` of any visited pose, on the
// evaluation grid.
double coverage(std::span<const sim::Pose> trace, const sim::World& world, double radius = 2.0);
double coverage(std::span<const sim::Pose> trace, const sim::OccupancyGrid& grid, double radius);

// Coverage after each stride-sized prefix of the trace.
std::vector<std::pair<long, double>> coverage_curve(std::span<const sim::Pose> trace,
                                                    const sim::World& world, double radius,
                                                    long stride);

// Success weighted by completion time: success * t_opt / max(t_agent, t_opt).
double sct(bool success, long t_agent, long t_optimal);

// Optimal completion steps from the geodesic oracle at full speed.
long optimal_steps(const sim::World& world, const sim::Point& start, const sim::Point& goal);

// Spearman rank correlation (average-rank ties).
double spearman(std::span<const double> a, std::span<const double> b);

// Undirected coverage probe: repeated fixed-horizon legs, either decoding
// prior-sampled latents or running time-correlated random action bursts.
// No graph, no fine-tuning; collisions trigger the same scripted rotation
// recovery in both variants.
enum class CoverageVariant { kPriorSampling, kRandomBurst };
std::vector<sim::Pose> undirected_rollout(const sim::World& world, const sim::Pose& start,
                                          const model::ModelParams& params,
                                          CoverageVariant variant, long n_steps, int horizon,
                                          std::uint64_t seed);

struct RunSetup {
  sim::World world;
  std::string world_id;
  sim::Pose start;
  sim::Point goal;
  agent::ExploreConfig cfg;
  long coverage_stride = 25;
  double coverage_radius = 2.0;
};

// One full exploration-then-navigation trial of a method. The navigation
// phase restarts from the start pose and runs only after discovery; failed
// navigation is charged the full navigation budget.
RunReport run_method(Method method, const RunSetup& setup, const model::ModelParams& ckpt,
                     std::uint64_t seed, agent::ExploreResult* explore_out = nullptr);

// Adds obstacles, rejection-sampled to stay clear of the protected discs and
// to preserve connectivity between them. Deterministic in seed.
sim::World perturb_world(const sim::World& world, int n_extra_obstacles, std::uint64_t seed,
                         const std::vector<sim::Point>& protect, double protect_radius = 2.0);

nlohmann::json report_to_json(const RunReport& r);
RunReport report_from_json(const nlohmann::json& j);
void save_report(const RunReport& r, const std::string& path);
RunReport load_report(const std::string& path);

}  // namespace recon::eval
