#include "recon/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "recon/datagen.hpp"
#include "recon/errors.hpp"

namespace recon::eval {

using sim::OccupancyGrid;
using sim::Pose;
using sim::World;

Method method_from_string(const std::string& name) {
  if (name == "recon") return Method::kRecon;
  if (name == "reactive") return Method::kReactive;
  if (name == "random-actions") return Method::kRandomActions;
  if (name == "vanilla") return Method::kVanilla;
  throw ContractViolation("unknown method tag: " + name);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kRecon: return "recon";
    case Method::kReactive: return "reactive";
    case Method::kRandomActions: return "random-actions";
    case Method::kVanilla: return "vanilla";
  }
  return "?";
}

namespace {
// Marks grid cells within radius of each pose; returns covered free fraction.
class CoverageAccumulator {
 public:
  CoverageAccumulator(const OccupancyGrid& grid, double radius)
      : grid_(grid), visited_(static_cast<size_t>(grid.nx()) * grid.ny(), 0) {
    r_cells_ = static_cast<int>(std::ceil(radius / grid.cell()));
    r2_ = radius * radius;
  }

  void add(const Pose& p) {
    const auto [cx, cy] = grid_.cell_of({p.x, p.y});
    for (int dy = -r_cells_; dy <= r_cells_; ++dy) {
      for (int dx = -r_cells_; dx <= r_cells_; ++dx) {
        const int ix = cx + dx, iy = cy + dy;
        if (ix < 0 || iy < 0 || ix >= grid_.nx() || iy >= grid_.ny()) continue;
        const auto c = grid_.center_of(ix, iy);
        const double ddx = c.x - p.x, ddy = c.y - p.y;
        if (ddx * ddx + ddy * ddy > r2_) continue;
        const std::size_t idx = static_cast<size_t>(iy) * grid_.nx() + ix;
        if (!visited_[idx] && grid_.free_cell(ix, iy)) {
          visited_[idx] = 1;
          ++covered_;
        }
      }
    }
  }

  double fraction() const {
    const int total = grid_.free_cell_count();
    return total == 0 ? 0.0 : static_cast<double>(covered_) / total;
  }

 private:
  const OccupancyGrid& grid_;
  std::vector<std::uint8_t> visited_;
  int r_cells_ = 0;
  double r2_ = 0.0;
  long covered_ = 0;
};
}  // namespace

double coverage(std::span<const Pose> trace, const OccupancyGrid& grid, double radius) {
  CoverageAccumulator acc(grid, radius);
  for (const auto& p : trace) acc.add(p);
  return acc.fraction();
}

double coverage(std::span<const Pose> trace, const World& world, double radius) {
  OccupancyGrid grid(world);
  return coverage(trace, grid, radius);
}

std::vector<std::pair<long, double>> coverage_curve(std::span<const Pose> trace,
                                                    const World& world, double radius,
                                                    long stride) {
  require(stride >= 1, "coverage_curve: stride must be >= 1");
  OccupancyGrid grid(world);
  CoverageAccumulator acc(grid, radius);
  std::vector<std::pair<long, double>> curve;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    acc.add(trace[i]);
    const long step = static_cast<long>(i);
    if (step % stride == 0 || i + 1 == trace.size()) curve.emplace_back(step, acc.fraction());
  }
  return curve;
}

double sct(bool success, long t_agent, long t_optimal) {
  require(t_optimal >= 1, "sct: t_optimal must be >= 1");
  if (!success) return 0.0;
  return static_cast<double>(t_optimal) / static_cast<double>(std::max(t_agent, t_optimal));
}

long optimal_steps(const World& world, const sim::Point& start, const sim::Point& goal) {
  const double g = sim::geodesic(world, start, goal);
  require(std::isfinite(g), "optimal_steps: start and goal are disconnected");
  return std::max(1L, static_cast<long>(std::ceil(g / (sim::kVMax * world.dt))));
}

namespace {
std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * (i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, "spearman: need two equal-length series");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    num += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return num / std::sqrt(va * vb);
}

std::vector<Pose> undirected_rollout(const World& world, const Pose& start,
                                     const model::ModelParams& params, CoverageVariant variant,
                                     long n_steps, int horizon, std::uint64_t seed) {
  agent::SimSession session(world, start);
  Rng rng(derive_seed(seed, "undirected"));
  Rng prior_rng(derive_seed(seed, "undirected-prior"));
  sim::Action prev{0.5 * sim::kVMax, 0.0};

  // Scripted rotation recovery, identical for both variants.
  auto backup = [&]() {
    const double turn = sim::kPi + rng.uniform(-0.3, 0.3);
    for (int i = 0; i < 4 && session.steps() < n_steps; ++i)
      session.rotate_in_place(turn / 4.0);
  };

  while (session.steps() < n_steps) {
    bool collided = false;
    if (variant == CoverageVariant::kPriorSampling) {
      const auto z = model::sample_prior(params.latent_dim, prior_rng);
      for (int tau = 0; tau < horizon && session.steps() < n_steps; ++tau) {
        const auto pred = model::decode(params, session.observe(), z.z);
        const double sv = std::exp(pred.dist.log_sigma[0]);
        const double sw = std::exp(pred.dist.log_sigma[1]);
        const auto a = sim::Action::clamped(pred.dist.mu[0] + sv * rng.normal(),
                                            pred.dist.mu[1] + sw * rng.normal());
        collided = session.step(a);
        if (collided) break;
      }
    } else {
      for (int tau = 0; tau < horizon && session.steps() < n_steps; ++tau) {
        prev = data::random_walk_action(prev, rng);
        collided = session.step(prev);
        if (collided) break;
      }
    }
    if (collided) backup();
  }
  return session.trace();
}

namespace {
sim::Pose goal_pose(const RunSetup& setup) { return {setup.goal.x, setup.goal.y, 0.0}; }
}  // namespace

RunReport run_method(Method method, const RunSetup& setup, const model::ModelParams& ckpt,
                     std::uint64_t seed, agent::ExploreResult* explore_out) {
  RunReport report;
  report.method = method_name(method);
  report.seed = seed;
  report.world_id = setup.world_id;

  agent::ExploreConfig cfg = setup.cfg;
  cfg.seed = seed;
  cfg.beta = ckpt.beta;
  switch (method) {
    case Method::kRecon:
    case Method::kVanilla:
      break;
    case Method::kReactive:
      cfg.use_graph = false;
      break;
    case Method::kRandomActions:
      cfg.random_burst_at_frontier = true;
      break;
  }

  agent::SimSession session(setup.world, setup.start);
  auto result = agent::explore(session, ckpt, sim::observe(setup.world, goal_pose(setup)),
                               setup.goal, cfg);

  report.discovered = result.discovered;
  report.exploration_steps = result.discovered ? result.steps_to_discovery : result.total_steps;
  report.coverage_trace =
      coverage_curve(result.pose_trace, setup.world, setup.coverage_radius, setup.coverage_stride);

  std::map<std::string, long> hist;
  for (const auto& l : result.legs) hist[agent::branch_name(l.branch)] += 1;
  report.branch_histogram.assign(hist.begin(), hist.end());

  if (result.discovered) {
    report.nav_attempted = true;
    agent::SimSession nav_session(setup.world, setup.start);
    const auto o_goal = sim::observe(setup.world, goal_pose(setup));
    agent::NavResult nav;
    if (method == Method::kReactive) {
      nav = agent::reactive_navigate(nav_session, result.params, o_goal, setup.goal, cfg);
    } else {
      nav = agent::goal_navigate(nav_session, result.params, result.graph, o_goal, setup.goal,
                                 cfg);
    }
    report.nav_success = nav.success;
    // Failed recalls are charged the full budget so slow and absent recall
    // compare on one scale.
    report.navigation_steps = nav.success ? nav.steps : cfg.nav_step_budget;
    const long t_opt = optimal_steps(setup.world, {setup.start.x, setup.start.y}, setup.goal);
    report.sct = sct(nav.success, report.navigation_steps, t_opt);
  }

  if (explore_out) *explore_out = std::move(result);
  return report;
}

World perturb_world(const World& world, int n_extra_obstacles, std::uint64_t seed,
                    const std::vector<sim::Point>& protect, double protect_radius) {
  require(n_extra_obstacles >= 0, "perturb_world: negative obstacle count");
  Rng rng(derive_seed(seed, "perturb"));
  World w = world;
  for (int n = 0; n < n_extra_obstacles; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < 200; ++attempt) {
      sim::Circle c;
      c.r = rng.uniform(0.4, 0.9);
      c.x = rng.uniform(w.bounds.xmin + c.r, w.bounds.xmax - c.r);
      c.y = rng.uniform(w.bounds.ymin + c.r, w.bounds.ymax - c.r);
      bool ok = true;
      for (const auto& p : protect) {
        if (std::hypot(p.x - c.x, p.y - c.y) < c.r + w.agent_radius + protect_radius) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      World candidate = w;
      candidate.obstacles.push_back(c);
      if (protect.size() >= 2) {
        OccupancyGrid grid(candidate);
        for (std::size_t i = 0; ok && i + 1 < protect.size(); ++i) {
          if (!std::isfinite(sim::geodesic(grid, protect[i], protect[i + 1]))) ok = false;
        }
      }
      if (!ok) continue;
      w = std::move(candidate);
      placed = true;
      break;
    }
    if (!placed)
      throw WorldGenError("perturb_world: could not place obstacle " + std::to_string(n));
  }
  return w;
}

nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json cov = nlohmann::json::array();
  for (const auto& [step, frac] : r.coverage_trace) cov.push_back({step, frac});
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, v] : r.branch_histogram) hist[k] = v;
  return {{"method", r.method},
          {"seed", r.seed},
          {"world_id", r.world_id},
          {"discovered", r.discovered},
          {"exploration_steps", r.exploration_steps},
          {"nav_attempted", r.nav_attempted},
          {"nav_success", r.nav_success},
          {"navigation_steps", r.navigation_steps},
          {"sct", r.sct},
          {"coverage_trace", cov},
          {"branch_histogram", hist}};
}

RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.method = j.at("method").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.world_id = j.at("world_id").get<std::string>();
  r.discovered = j.at("discovered").get<bool>();
  r.exploration_steps = j.at("exploration_steps").get<long>();
  r.nav_attempted = j.at("nav_attempted").get<bool>();
  r.nav_success = j.at("nav_success").get<bool>();
  r.navigation_steps = j.at("navigation_steps").get<long>();
  r.sct = j.at("sct").get<double>();
  for (const auto& c : j.at("coverage_trace"))
    r.coverage_trace.emplace_back(c.at(0).get<long>(), c.at(1).get<double>());
  for (const auto& [k, v] : j.at("branch_histogram").items())
    r.branch_histogram.emplace_back(k, v.get<long>());
  return r;
}

void save_report(const RunReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_report: cannot open " + path);
  out << report_to_json(r).dump(2) << "\n";
}

RunReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_report: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_report: bad JSON in " + path + ": " + e.what());
  }
  return report_from_json(j);
}

}  // namespace recon::eval
