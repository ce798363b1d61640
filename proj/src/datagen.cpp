#include "recon/datagen.hpp"

#include <cmath>
#include <fstream>

#include "recon/errors.hpp"

#include "json.hpp"

namespace recon::data {

using sim::Action;
using sim::Observation;
using sim::Pose;
using sim::World;

sim::Action random_walk_action(const Action& prev, Rng& rng, double rho) {
  const double uv = rng.uniform(0.0, sim::kVMax);
  const double uw = rng.uniform(-sim::kWMax, sim::kWMax);
  return Action::clamped(rho * prev.v + (1.0 - rho) * uv, rho * prev.w + (1.0 - rho) * uw);
}

std::vector<Trajectory> collect(const World& world, const Pose& start, std::uint64_t seed,
                                const CollectOptions& opts) {
  require(sim::in_free_space(world, {start.x, start.y}), "collect: start pose not in free space");
  require(opts.n_steps >= 0, "collect: negative step budget");

  Rng rng(derive_seed(seed, "collect"));
  std::vector<Trajectory> out;
  Trajectory cur;
  Pose pose = start;
  Action act{0.5 * sim::kVMax, 0.0};
  cur.obs.push_back(sim::observe(world, pose));

  int consecutive_failures = 0;
  long steps = 0;

  auto flush = [&](bool collided) {
    // Keep segments with at least one executed step.
    if (!cur.acts.empty()) {
      cur.collision_terminated = collided;
      out.push_back(std::move(cur));
    }
    cur = Trajectory{};
  };

  while (steps < opts.n_steps) {
    act = random_walk_action(act, rng, opts.ar_rho);
    const auto res = sim::step(world, pose, act);
    ++steps;
    cur.acts.push_back(act);
    pose = res.pose;
    cur.obs.push_back(sim::observe(world, pose));

    if (res.collided) {
      flush(true);
      // Scripted recovery: rotate roughly half a turn in place, split over a
      // few control steps. Not a policy action, so the turn-rate clamp does
      // not apply. Counts against the step budget.
      const double turn = sim::kPi + rng.uniform(-opts.backup_jitter, opts.backup_jitter);
      for (int i = 0; i < opts.backup_steps && steps < opts.n_steps; ++i) {
        pose.theta = sim::wrap_angle(pose.theta + turn / opts.backup_steps);
        ++steps;
      }
      act = Action{0.0, 0.0};
      // Probe one straight nudge to detect a wedged agent.
      const auto probe = sim::step(world, pose, Action{0.2, 0.0});
      if (probe.collided) {
        ++consecutive_failures;
        if (consecutive_failures >= opts.max_consecutive_failures)
          throw WorldGenError(
              "collect: agent wedged after " + std::to_string(consecutive_failures) +
              " consecutive backup attempts at (" + std::to_string(pose.x) + ", " +
              std::to_string(pose.y) + ")");
      } else {
        consecutive_failures = 0;
      }
      cur.obs.assign(1, sim::observe(world, pose));
      continue;
    }

    consecutive_failures = 0;
    if (static_cast<int>(cur.acts.size()) >= opts.max_trajectory_len) {
      Observation tail = cur.obs.back();
      flush(false);
      cur.obs.push_back(tail);
    }
  }
  flush(false);
  return out;
}

std::vector<Quadruple> relabel(const Trajectory& traj, int t_max) {
  require(t_max >= 1, "relabel: t_max must be >= 1");
  require(traj.obs.size() == traj.acts.size() + 1, "relabel: malformed trajectory");
  std::vector<Quadruple> out;
  const int n = static_cast<int>(traj.obs.size());
  for (int t = 0; t + 1 < n; ++t) {
    const int g_hi = std::min(n - 1, t + t_max);
    for (int g = t + 1; g <= g_hi; ++g) {
      out.push_back({traj.obs[t], traj.obs[g], traj.acts[t], g - t});
    }
  }
  return out;
}

Dataset relabel_all(const std::vector<Trajectory>& trajs, int t_max) {
  Dataset ds;
  for (const auto& tr : trajs) {
    auto qs = relabel(tr, t_max);
    ds.quads.insert(ds.quads.end(), qs.begin(), qs.end());
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_dataset: cannot open " + path);
  for (const auto& q : ds.quads) {
    nlohmann::json j = {
        {"o", q.o.rays}, {"g", q.g.rays}, {"a", {q.a.v, q.a.w}}, {"d", q.d}};
    out << j.dump() << "\n";
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_dataset: cannot open " + path);
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("load_dataset: bad JSON at " + path + ":" + std::to_string(lineno) + ": " +
                    e.what());
    }
    Quadruple q;
    q.o.rays = j.at("o").get<std::vector<double>>();
    q.g.rays = j.at("g").get<std::vector<double>>();
    q.a.v = j.at("a").at(0).get<double>();
    q.a.w = j.at("a").at(1).get<double>();
    q.d = j.at("d").get<int>();
    if (q.o.rays.size() != q.g.rays.size())
      throw IoError("load_dataset: ray-length mismatch at line " + std::to_string(lineno));
    ds.quads.push_back(std::move(q));
  }
  return ds;
}

void save_trajectories(const std::vector<Trajectory>& trajs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_trajectories: cannot open " + path);
  for (const auto& tr : trajs) {
    nlohmann::json obs = nlohmann::json::array();
    for (const auto& o : tr.obs) obs.push_back(o.rays);
    nlohmann::json acts = nlohmann::json::array();
    for (const auto& a : tr.acts) acts.push_back({a.v, a.w});
    out << nlohmann::json{{"obs", obs}, {"acts", acts}, {"collision", tr.collision_terminated}}
               .dump()
        << "\n";
  }
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_trajectories: cannot open " + path);
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("load_trajectories: bad JSON at line " + std::to_string(lineno) + ": " +
                    e.what());
    }
    Trajectory tr;
    for (const auto& oj : j.at("obs")) tr.obs.push_back({oj.get<std::vector<double>>()});
    for (const auto& aj : j.at("acts"))
      tr.acts.push_back({aj.at(0).get<double>(), aj.at(1).get<double>()});
    tr.collision_terminated = j.at("collision").get<bool>();
    if (tr.obs.size() != tr.acts.size() + 1)
      throw IoError("load_trajectories: malformed trajectory at line " + std::to_string(lineno));
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace recon::data
