#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recon/rng.hpp"
#include "recon/world.hpp"

namespace recon::data {

// One contiguous run between collisions / segment cuts. obs has exactly one
// more entry than acts (the terminal observation); at least one step.
struct Trajectory {
  std::vector<sim::Observation> obs;
  std::vector<sim::Action> acts;
  bool collision_terminated = false;

  std::size_t length() const { return obs.size(); }  // observation count
};

// Hindsight-relabeled training record: from o, heading for goal g, the next
// action was a and the goal was d control steps ahead.
struct Quadruple {
  sim::Observation o;
  sim::Observation g;
  sim::Action a;
  int d = 0;
};

struct Dataset {
  std::vector<Quadruple> quads;
  // Provenance, echoed into sidecar manifests.
  std::uint64_t collect_seed = 0;
  std::uint64_t world_seed = 0;
  long source_steps = 0;
};

struct CollectOptions {
  long n_steps = 1000;
  int max_trajectory_len = 100;  // steps per segment before a cut
  double ar_rho = 0.9;           // AR(1) action correlation
  int backup_steps = 4;
  double backup_jitter = 0.3;    // rad, uniform on the pi turn
  int max_consecutive_failures = 50;
};

// AR(1) blend toward a fresh uniform draw over the action box, clamped.
sim::Action random_walk_action(const sim::Action& prev, Rng& rng, double rho = 0.9);

// Time-correlated random walk with collision segmentation and an in-place
// rotation backup after each collision. Deterministic in (world, seed, opts).
std::vector<Trajectory> collect(const sim::World& world, const sim::Pose& start,
                                std::uint64_t seed, const CollectOptions& opts = {});

// All ordered pairs (t, g), t < g <= t + t_max, labeled with the index gap.
std::vector<Quadruple> relabel(const Trajectory& traj, int t_max);

// Relabel every trajectory into one dataset.
Dataset relabel_all(const std::vector<Trajectory>& trajs, int t_max);

// JSON-lines, {"o": [...], "g": [...], "a": [v, w], "d": n} per line.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// JSON-lines trajectory archive for re-relabeling.
void save_trajectories(const std::vector<Trajectory>& trajs, const std::string& path);
std::vector<Trajectory> load_trajectories(const std::string& path);

}  // namespace recon::data
