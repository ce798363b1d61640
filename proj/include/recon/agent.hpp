#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "recon/datagen.hpp"
#include "recon/latent_model.hpp"
#include "recon/topo_graph.hpp"
#include "recon/world.hpp"

#include "json.hpp"

namespace recon::agent {

// Rollout session over an immutable world. Keeps the pose trace for
// evaluation; agents only ever read observations from it.
class SimSession {
 public:
  SimSession(sim::World world, const sim::Pose& start);

  const sim::World& world() const { return world_; }
  const sim::Pose& pose() const { return pose_; }
  long steps() const { return steps_; }
  const std::vector<sim::Pose>& trace() const { return trace_; }

  sim::Observation observe() const { return sim::observe(world_, pose_); }
  bool step(const sim::Action& a);  // returns true on collision
  // Scripted recovery rotation; consumes one control step, never collides.
  void rotate_in_place(double dtheta);
  // Evaluation-only reset to a free pose; does not count as a control step.
  void teleport(const sim::Pose& p);

 private:
  sim::World world_;
  sim::Pose pose_;
  long steps_ = 0;
  std::vector<sim::Pose> trace_;
};

enum class Branch { kFeasibleGoal, kExploreAtFrontier, kGoToFrontier, kRandomBurst, kGoalVerify };
std::string branch_name(Branch b);

enum class LegMode { kExplore, kNavigate };

struct ExploreConfig {
  double delta1 = 4.0;            // steps; dedup / at-frontier / goal-reached threshold
  double delta2 = 15.0;           // steps; neighbor threshold
  double epsilon = 1e-2;          // prior-density feasibility threshold
  double beta = 1.0;              // bottleneck weight used when (re)training
  int finetune_epochs = 10;       // gamma
  int horizon = 10;               // H, control steps per subgoal leg
  double max_edge_weight = 20.0;  // W_max edge filter for path planning
  double goal_radius = 2.0;       // m; oracle scoring radius (evaluation only)
  double goal_verify_stop_steps = 1.5;  // arrival sharpening on verify legs
  long step_budget = 1000;
  long nav_step_budget = 400;
  int max_replans = 10;
  int finetune_batch = 128;
  double finetune_lr = 1e-4;
  std::uint64_t seed = 0;

  // Ablation switches.
  bool use_graph = true;                  // false: reactive variant, no memory
  bool random_burst_at_frontier = false;  // true: random action bursts at the frontier

  // Test-harness hooks.
  bool force_infeasible = false;
  bool disable_prior_sampling = false;
};

struct LegRecord {
  Branch branch = Branch::kGoToFrontier;
  model::LatentOrigin z_origin = model::LatentOrigin::kPosteriorMean;
  double predicted_goal_distance = 0.0;  // d-bar to goal at leg start
  std::size_t graph_size = 0;            // after the leg's graph update
  long step_at = 0;
  int leg_steps = 0;
  bool collided = false;
};

struct ExploreResult {
  topo::TopoGraph graph;
  data::Dataset online_data;
  model::ModelParams params;  // fine-tuned copy
  bool discovered = false;
  long steps_to_discovery = -1;
  long total_steps = 0;
  std::vector<LegRecord> legs;
  std::vector<sim::Pose> pose_trace;  // evaluation only
};

struct SubgoalOptions {
  LegMode mode = LegMode::kExplore;
  // Navigate-mode legs may end once the predicted distance to this
  // observation drops below stop_threshold; explore-mode legs always run the
  // full horizon (minus collision truncation).
  const sim::Observation* stop_at = nullptr;
  double stop_threshold = 4.0;
};

// Fixed-latent rollout for at most `horizon` steps; collision truncates the
// leg. Returns endpoint-labeled records {(o_t, o_end, a_t, L - t)} and o_end.
std::pair<std::vector<data::Quadruple>, sim::Observation> subgoal_navigate(
    SimSession& session, const model::ModelParams& params, const model::LatentGoal& z, int horizon,
    const SubgoalOptions& opts, Rng& rng);

// Goal-directed exploration: choose a subgoal latent (feasible goal / prior
// sample at the frontier / least-explored neighbor), roll it out, grow the
// graph and the online dataset, fine-tune, repeat. Stops when the predicted
// goal distance falls under delta1 and an oracle check at the end of a
// verification leg confirms arrival, or when the budget runs out.
ExploreResult explore(SimSession& session, const model::ModelParams& init,
                      const sim::Observation& o_goal, const sim::Point& goal_point,
                      const ExploreConfig& cfg);

struct NavResult {
  bool success = false;
  long steps = 0;
  bool no_path = false;
  int replans = 0;
};

// Plan through the graph and walk the path with mean actions. Hops whose
// target is already within delta1 (predicted) are skipped; a leg that ends
// further than delta2 from its hop target triggers re-association and a
// re-plan. Success is scored by the oracle only.
NavResult goal_navigate(SimSession& session, const model::ModelParams& params,
                        topo::TopoGraph& graph, const sim::Observation& o_goal,
                        const sim::Point& goal_point, const ExploreConfig& cfg);

// Graph-free pursuit used by the reactive variant: repeated legs straight
// toward the goal encoding.
NavResult reactive_navigate(SimSession& session, const model::ModelParams& params,
                            const sim::Observation& o_goal, const sim::Point& goal_point,
                            const ExploreConfig& cfg);

// Distance callback bound to a model, shared by graph queries.
topo::DistanceFn distance_fn(const model::ModelParams& params);

nlohmann::json explore_result_to_json(const ExploreResult& r);
std::string decision_trace_lines(const ExploreResult& r);

}  // namespace recon::agent
