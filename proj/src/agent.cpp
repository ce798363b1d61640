#include "recon/agent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "recon/errors.hpp"

namespace recon::agent {

using data::Quadruple;
using model::LatentGoal;
using model::LatentOrigin;
using model::ModelParams;
using sim::Observation;

SimSession::SimSession(sim::World world, const sim::Pose& start)
    : world_(std::move(world)), pose_(start) {
  require(sim::in_free_space(world_, {start.x, start.y}),
          "SimSession: start pose not in free space");
  pose_.theta = sim::wrap_angle(pose_.theta);
  trace_.push_back(pose_);
}

bool SimSession::step(const sim::Action& a) {
  const auto res = sim::step(world_, pose_, a);
  pose_ = res.pose;
  ++steps_;
  trace_.push_back(pose_);
  return res.collided;
}

void SimSession::rotate_in_place(double dtheta) {
  pose_.theta = sim::wrap_angle(pose_.theta + dtheta);
  ++steps_;
  trace_.push_back(pose_);
}

void SimSession::teleport(const sim::Pose& p) {
  require(sim::in_free_space(world_, {p.x, p.y}), "SimSession::teleport: pose not free");
  pose_ = p;
  pose_.theta = sim::wrap_angle(pose_.theta);
  trace_.push_back(pose_);
}

std::string branch_name(Branch b) {
  switch (b) {
    case Branch::kFeasibleGoal: return "feasible-goal";
    case Branch::kExploreAtFrontier: return "explore-at-frontier";
    case Branch::kGoToFrontier: return "go-to-frontier";
    case Branch::kRandomBurst: return "random-burst";
    case Branch::kGoalVerify: return "goal-verify";
  }
  return "?";
}

namespace {
std::string origin_name(LatentOrigin o) {
  switch (o) {
    case LatentOrigin::kPosteriorMean: return "posterior-mean";
    case LatentOrigin::kPosteriorSample: return "posterior-sample";
    case LatentOrigin::kPriorSample: return "prior-sample";
  }
  return "?";
}
}  // namespace

topo::DistanceFn distance_fn(const ModelParams& params) {
  return [&params](const Observation& a, const Observation& b) {
    return model::predicted_distance(params, a, b);
  };
}

std::pair<std::vector<Quadruple>, Observation> subgoal_navigate(SimSession& session,
                                                                const ModelParams& params,
                                                                const LatentGoal& z, int horizon,
                                                                const SubgoalOptions& opts,
                                                                Rng& rng) {
  require(static_cast<int>(z.z.size()) == params.latent_dim,
          "subgoal_navigate: latent dimension mismatch");
  require(horizon >= 1, "subgoal_navigate: horizon must be >= 1");

  std::vector<std::pair<Observation, sim::Action>> rec;
  rec.reserve(horizon);
  Observation o = session.observe();

  for (int tau = 0; tau < horizon; ++tau) {
    if (opts.mode == LegMode::kNavigate && opts.stop_at != nullptr &&
        model::predicted_distance(params, o, *opts.stop_at) < opts.stop_threshold)
      break;

    const auto pred = model::decode(params, o, z.z);
    sim::Action a;
    if (opts.mode == LegMode::kExplore) {
      const double sv = std::exp(pred.dist.log_sigma[0]);
      const double sw = std::exp(pred.dist.log_sigma[1]);
      a = sim::Action::clamped(pred.dist.mu[0] + sv * rng.normal(),
                               pred.dist.mu[1] + sw * rng.normal());
    } else {
      a = sim::Action::clamped(pred.action_mean.v, pred.action_mean.w);
    }

    const bool collided = session.step(a);
    rec.emplace_back(std::move(o), a);
    o = session.observe();
    if (collided) break;
  }

  std::vector<Quadruple> labeled;
  labeled.reserve(rec.size());
  const int leg_len = static_cast<int>(rec.size());
  for (int t = 0; t < leg_len; ++t) {
    labeled.push_back({rec[t].first, o, rec[t].second, leg_len - t});
  }
  return {std::move(labeled), std::move(o)};
}

namespace {

struct ExploreState {
  ModelParams params;
  topo::TopoGraph graph;
  data::Dataset online;
  nn::AdamState adam;
  Rng leg_rng;
  Rng prior_rng;
  sim::Action burst_prev{0.5 * sim::kVMax, 0.0};
  long finetune_round = 0;

  explicit ExploreState(const ModelParams& init, const ExploreConfig& cfg)
      : params(init),
        leg_rng(derive_seed(cfg.seed, "explore-legs")),
        prior_rng(derive_seed(cfg.seed, "prior-draws")) {
    auto views = std::as_const(params).encoder.param_views();
    auto dec = std::as_const(params).decoder.param_views();
    views.insert(views.end(), dec.begin(), dec.end());
    adam = nn::make_adam(views, cfg.finetune_lr);
    // Fine-tuning uses the configured bottleneck weight; callers running a
    // beta=0 checkpoint pass beta=0 here as well.
    params.beta = cfg.beta;
  }
};

// Random action burst used by the ECR-style ablation at the frontier.
std::pair<std::vector<Quadruple>, Observation> random_burst_leg(SimSession& session,
                                                                ExploreState& st,
                                                                const ExploreConfig& cfg) {
  std::vector<std::pair<Observation, sim::Action>> rec;
  Observation o = session.observe();
  for (int tau = 0; tau < cfg.horizon; ++tau) {
    st.burst_prev = data::random_walk_action(st.burst_prev, st.leg_rng);
    const bool collided = session.step(st.burst_prev);
    rec.emplace_back(std::move(o), st.burst_prev);
    o = session.observe();
    if (collided) break;
  }
  std::vector<Quadruple> labeled;
  const int leg_len = static_cast<int>(rec.size());
  for (int t = 0; t < leg_len; ++t)
    labeled.push_back({rec[t].first, o, rec[t].second, leg_len - t});
  return {std::move(labeled), std::move(o)};
}

void finetune(ExploreState& st, const ExploreConfig& cfg) {
  if (st.online.quads.empty() || cfg.finetune_epochs <= 0) return;
  model::TrainOptions opts;
  opts.epochs = cfg.finetune_epochs;
  opts.batch_size = std::min<std::size_t>(cfg.finetune_batch, st.online.quads.size());
  opts.lr = cfg.finetune_lr;
  opts.seed = derive_seed(cfg.seed, "finetune") + static_cast<std::uint64_t>(st.finetune_round++);
  model::train(st.params, st.online, opts, &st.adam);
}

double oracle_goal_distance(const SimSession& session, const sim::Point& goal_point) {
  const auto& p = session.pose();
  return std::hypot(p.x - goal_point.x, p.y - goal_point.y);
}

}  // namespace

ExploreResult explore(SimSession& session, const ModelParams& init, const Observation& o_goal,
                      const sim::Point& goal_point, const ExploreConfig& cfg) {
  require(static_cast<int>(o_goal.rays.size()) == init.obs_dim,
          "explore: goal observation length mismatch");

  ExploreState st(init, cfg);
  auto dist = distance_fn(st.params);

  // Seed the graph with the start observation so association is never asked
  // about an empty graph.
  if (cfg.use_graph) st.graph.expand(dist, session.observe(), cfg.delta1);

  ExploreResult result;
  const long start_steps = session.steps();

  while (session.steps() - start_steps < cfg.step_budget) {
    const Observation o_t = session.observe();
    const double d_goal = model::predicted_distance(st.params, o_t, o_goal);

    LegRecord leg;
    leg.step_at = session.steps();
    leg.predicted_goal_distance = d_goal;

    std::vector<Quadruple> leg_data;
    Observation o_end;

    if (d_goal < cfg.delta1) {
      // The model believes the goal is at hand: drive in and check.
      leg.branch = Branch::kGoalVerify;
      leg.z_origin = LatentOrigin::kPosteriorMean;
      LatentGoal z{model::encode(st.params, o_t, o_goal).mu, LatentOrigin::kPosteriorMean};
      SubgoalOptions sopts;
      sopts.mode = LegMode::kNavigate;
      sopts.stop_at = &o_goal;
      sopts.stop_threshold = cfg.goal_verify_stop_steps;
      std::tie(leg_data, o_end) = subgoal_navigate(session, st.params, z, cfg.horizon, sopts,
                                                   st.leg_rng);
    } else {
      const bool feasible =
          !cfg.force_infeasible && model::feasibility(st.params, o_t, o_goal, cfg.epsilon);
      bool burst = false;
      LatentGoal z;
      if (feasible) {
        leg.branch = Branch::kFeasibleGoal;
        z = {model::encode(st.params, o_t, o_goal).mu, LatentOrigin::kPosteriorMean};
      } else if (!cfg.use_graph) {
        // Reactive variant: no memory, explore blind from wherever we are.
        leg.branch = Branch::kExploreAtFrontier;
        z = model::sample_prior(st.params.latent_dim, st.prior_rng);
      } else {
        const auto [neighbor, d_n] = st.graph.least_explored_neighbor(dist, o_t, cfg.delta2);
        if (d_n < cfg.delta1 && cfg.random_burst_at_frontier) {
          leg.branch = Branch::kRandomBurst;
          burst = true;
        } else if (d_n < cfg.delta1 && !cfg.disable_prior_sampling) {
          leg.branch = Branch::kExploreAtFrontier;
          z = model::sample_prior(st.params.latent_dim, st.prior_rng);
        } else {
          leg.branch = Branch::kGoToFrontier;
          z = {model::encode(st.params, o_t, neighbor->o).mu, LatentOrigin::kPosteriorMean};
        }
      }
      leg.z_origin = z.origin;

      if (burst) {
        std::tie(leg_data, o_end) = random_burst_leg(session, st, cfg);
      } else {
        SubgoalOptions sopts;
        sopts.mode = LegMode::kExplore;
        std::tie(leg_data, o_end) =
            subgoal_navigate(session, st.params, z, cfg.horizon, sopts, st.leg_rng);
      }
    }

    leg.leg_steps = static_cast<int>(leg_data.size());
    leg.collided = leg.leg_steps > 0 && leg.leg_steps < cfg.horizon &&
                   leg.branch != Branch::kGoalVerify;

    st.online.quads.insert(st.online.quads.end(), leg_data.begin(), leg_data.end());
    if (cfg.use_graph) st.graph.expand(dist, o_end, cfg.delta1);
    finetune(st, cfg);

    leg.graph_size = st.graph.size();
    result.legs.push_back(leg);

    if (leg.branch == Branch::kGoalVerify) {
      const double d_after = model::predicted_distance(st.params, session.observe(), o_goal);
      if (d_after < cfg.delta1 && oracle_goal_distance(session, goal_point) <= cfg.goal_radius) {
        result.discovered = true;
        result.steps_to_discovery = session.steps() - start_steps;
        break;
      }
    }

    // A zero-step verify leg that failed its oracle check would spin forever
    // without this: treat it as one wasted step of budget.
    if (leg.leg_steps == 0 && leg.branch == Branch::kGoalVerify) {
      session.step(sim::Action{0.0, 0.0});
    }
  }

  result.graph = std::move(st.graph);
  result.online_data = std::move(st.online);
  result.params = std::move(st.params);
  result.total_steps = session.steps() - start_steps;
  result.pose_trace = session.trace();
  return result;
}

NavResult goal_navigate(SimSession& session, const ModelParams& params, topo::TopoGraph& graph,
                        const Observation& o_goal, const sim::Point& goal_point,
                        const ExploreConfig& cfg) {
  require(!graph.empty(), "goal_navigate: graph is empty");
  auto dist = distance_fn(params);

  NavResult res;
  const long start_steps = session.steps();

  Observation o_t = session.observe();
  int from = graph.associate(dist, o_t).id;
  const int to = graph.associate(dist, o_goal).id;
  auto path = graph.shortest_path(from, to, cfg.max_edge_weight);
  if (!path) {
    res.no_path = true;
    res.success = oracle_goal_distance(session, goal_point) <= cfg.goal_radius;
    return res;
  }

  std::size_t hop = 0;
  Rng rng(derive_seed(cfg.seed, "navigate"));
  while (session.steps() - start_steps < cfg.nav_step_budget) {
    o_t = session.observe();
    if (model::predicted_distance(params, o_t, o_goal) < cfg.delta1) break;
    if (hop >= path->size()) break;

    const auto& target = graph.node((*path)[hop]);
    if (model::predicted_distance(params, o_t, target.o) < cfg.delta1) {
      ++hop;
      continue;
    }

    LatentGoal z{model::encode(params, o_t, target.o).mu, LatentOrigin::kPosteriorMean};
    SubgoalOptions sopts;
    sopts.mode = LegMode::kNavigate;
    sopts.stop_at = &target.o;
    sopts.stop_threshold = cfg.delta1;
    auto [leg_data, o_end] = subgoal_navigate(session, params, z, cfg.horizon, sopts, rng);
    graph.increment_count(graph.associate(dist, o_end).id);

    if (leg_data.empty()) {
      ++hop;  // loop guard; a hop that cannot start counts as handled
      continue;
    }

    if (model::predicted_distance(params, o_end, target.o) > cfg.delta2) {
      // Drifted off the plan: re-associate and re-plan from here.
      if (res.replans >= cfg.max_replans) break;
      ++res.replans;
      from = graph.associate(dist, o_end).id;
      path = graph.shortest_path(from, to, cfg.max_edge_weight);
      if (!path) {
        res.no_path = true;
        break;
      }
      hop = 0;
      continue;
    }
    ++hop;
  }

  res.steps = session.steps() - start_steps;
  res.success = oracle_goal_distance(session, goal_point) <= cfg.goal_radius;
  return res;
}

NavResult reactive_navigate(SimSession& session, const ModelParams& params,
                            const Observation& o_goal, const sim::Point& goal_point,
                            const ExploreConfig& cfg) {
  NavResult res;
  const long start_steps = session.steps();
  Rng rng(derive_seed(cfg.seed, "navigate"));
  while (session.steps() - start_steps < cfg.nav_step_budget) {
    const Observation o_t = session.observe();
    if (model::predicted_distance(params, o_t, o_goal) < cfg.delta1) break;
    LatentGoal z{model::encode(params, o_t, o_goal).mu, LatentOrigin::kPosteriorMean};
    SubgoalOptions sopts;
    sopts.mode = LegMode::kNavigate;
    sopts.stop_at = &o_goal;
    sopts.stop_threshold = cfg.delta1;
    auto [leg_data, o_end] = subgoal_navigate(session, params, z, cfg.horizon, sopts, rng);
    if (leg_data.empty()) break;  // loop guard
  }
  res.steps = session.steps() - start_steps;
  res.success = oracle_goal_distance(session, goal_point) <= cfg.goal_radius;
  return res;
}

nlohmann::json explore_result_to_json(const ExploreResult& r) {
  nlohmann::json legs = nlohmann::json::array();
  for (const auto& l : r.legs) {
    legs.push_back({{"branch", branch_name(l.branch)},
                    {"z_origin", origin_name(l.z_origin)},
                    {"d_goal", l.predicted_goal_distance},
                    {"graph_size", l.graph_size},
                    {"step_at", l.step_at},
                    {"leg_steps", l.leg_steps},
                    {"collided", l.collided}});
  }
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& p : r.pose_trace) trace.push_back({p.x, p.y, p.theta});
  return {{"discovered", r.discovered},
          {"steps_to_discovery", r.steps_to_discovery},
          {"total_steps", r.total_steps},
          {"graph_vertices", r.graph.size()},
          {"graph_edges", r.graph.edge_count()},
          {"online_quadruples", r.online_data.quads.size()},
          {"legs", legs},
          {"pose_trace", trace}};
}

std::string decision_trace_lines(const ExploreResult& r) {
  std::ostringstream out;
  for (const auto& l : r.legs) {
    out << "step=" << l.step_at << " branch=" << branch_name(l.branch)
        << " z=" << origin_name(l.z_origin) << " d_goal=" << l.predicted_goal_distance
        << " graph=" << l.graph_size << " leg_steps=" << l.leg_steps
        << " collided=" << (l.collided ? 1 : 0) << "\n";
  }
  return out.str();
}

}  // namespace recon::agent
