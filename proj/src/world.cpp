#include "recon/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>

#include "recon/errors.hpp"

namespace recon::sim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kContactBackoff = 1e-9;
}  // namespace

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a > kPi) a -= 2.0 * kPi;
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

Action Action::clamped(double v, double w) {
  Action a;
  a.v = std::clamp(v, 0.0, kVMax);
  a.w = std::clamp(w, -kWMax, kWMax);
  return a;
}

bool in_free_space(const World& world, const Point& p) {
  const double r = world.agent_radius;
  if (p.x < world.bounds.xmin + r || p.x > world.bounds.xmax - r || p.y < world.bounds.ymin + r ||
      p.y > world.bounds.ymax - r)
    return false;
  for (const auto& c : world.obstacles) {
    const double dx = p.x - c.x;
    const double dy = p.y - c.y;
    const double rr = c.r + r;
    if (dx * dx + dy * dy < rr * rr) return false;
  }
  return true;
}

namespace {

// First parameter t in (0, 1] where p0 + t*d contacts the constraint set
// (inflated circles, inset bounds), or nullopt if the move is clear.
std::optional<double> first_contact(const World& world, const Point& p0, double dx, double dy) {
  double t_hit = kInf;

  const double r = world.agent_radius;
  const double xlo = world.bounds.xmin + r, xhi = world.bounds.xmax - r;
  const double ylo = world.bounds.ymin + r, yhi = world.bounds.ymax - r;
  if (dx > 0 && p0.x + dx > xhi) t_hit = std::min(t_hit, (xhi - p0.x) / dx);
  if (dx < 0 && p0.x + dx < xlo) t_hit = std::min(t_hit, (xlo - p0.x) / dx);
  if (dy > 0 && p0.y + dy > yhi) t_hit = std::min(t_hit, (yhi - p0.y) / dy);
  if (dy < 0 && p0.y + dy < ylo) t_hit = std::min(t_hit, (ylo - p0.y) / dy);

  for (const auto& c : world.obstacles) {
    const double R = c.r + r;
    const double mx = p0.x - c.x;
    const double my = p0.y - c.y;
    const double a = dx * dx + dy * dy;
    if (a == 0.0) continue;
    const double b = mx * dx + my * dy;
    const double cc = mx * mx + my * my - R * R;
    const double disc = b * b - a * cc;
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    double t = (-b - sq) / a;
    if (cc < 0.0) t = 0.0;  // already overlapping: block immediately
    if (t >= 0.0 && t <= 1.0) t_hit = std::min(t_hit, t);
  }

  if (t_hit > 1.0) return std::nullopt;
  return std::max(0.0, t_hit);
}

}  // namespace

StepResult step(const World& world, const Pose& pose, const Action& raw) {
  const Action a = Action::clamped(raw.v, raw.w);
  const double dx = a.v * std::cos(pose.theta) * world.dt;
  const double dy = a.v * std::sin(pose.theta) * world.dt;

  StepResult res;
  res.pose.theta = wrap_angle(pose.theta + a.w * world.dt);

  const auto hit = first_contact(world, {pose.x, pose.y}, dx, dy);
  if (!hit) {
    res.pose.x = pose.x + dx;
    res.pose.y = pose.y + dy;
    res.collided = false;
    return res;
  }
  // Stop at contact, backed off along the motion so clearance stays >= 0.
  const double len = std::hypot(dx, dy);
  double t = *hit;
  if (len > 0.0) t = std::max(0.0, t - kContactBackoff / len);
  res.pose.x = pose.x + t * dx;
  res.pose.y = pose.y + t * dy;
  res.collided = true;
  return res;
}

Observation observe(const World& world, const Pose& pose) {
  Observation obs;
  obs.rays.resize(world.ray_count);
  for (int k = 0; k < world.ray_count; ++k) {
    const double bearing = pose.theta + 2.0 * kPi * k / world.ray_count;
    const double ux = std::cos(bearing);
    const double uy = std::sin(bearing);
    double hit = world.max_range;

    // Bounds from inside.
    if (ux > 0) hit = std::min(hit, (world.bounds.xmax - pose.x) / ux);
    if (ux < 0) hit = std::min(hit, (world.bounds.xmin - pose.x) / ux);
    if (uy > 0) hit = std::min(hit, (world.bounds.ymax - pose.y) / uy);
    if (uy < 0) hit = std::min(hit, (world.bounds.ymin - pose.y) / uy);

    for (const auto& c : world.obstacles) {
      const double mx = pose.x - c.x;
      const double my = pose.y - c.y;
      const double b = mx * ux + my * uy;
      const double cc = mx * mx + my * my - c.r * c.r;
      const double disc = b * b - cc;
      if (disc < 0.0) continue;
      const double t = -b - std::sqrt(disc);
      if (t >= 0.0) hit = std::min(hit, t);
    }

    obs.rays[k] = std::clamp(hit / world.max_range, 0.0, 1.0);
  }
  return obs;
}

OccupancyGrid::OccupancyGrid(const World& world) {
  cell_ = world.agent_radius / 2.0;
  x0_ = world.bounds.xmin;
  y0_ = world.bounds.ymin;
  nx_ = std::max(1, static_cast<int>(std::ceil(world.bounds.width() / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(world.bounds.height() / cell_)));
  blocked_.assign(static_cast<size_t>(nx_) * ny_, 0);
  const double r = world.agent_radius;
  for (int iy = 0; iy < ny_; ++iy) {
    for (int ix = 0; ix < nx_; ++ix) {
      const Point p = center_of(ix, iy);
      bool blocked = p.x < world.bounds.xmin + r || p.x > world.bounds.xmax - r ||
                     p.y < world.bounds.ymin + r || p.y > world.bounds.ymax - r;
      if (!blocked) {
        for (const auto& c : world.obstacles) {
          const double dx = p.x - c.x, dy = p.y - c.y;
          const double rr = c.r + r;
          if (dx * dx + dy * dy < rr * rr) {
            blocked = true;
            break;
          }
        }
      }
      blocked_[index(ix, iy)] = blocked ? 1 : 0;
      if (!blocked) ++free_count_;
    }
  }
}

bool OccupancyGrid::free_cell(int ix, int iy) const {
  if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return false;
  return blocked_[index(ix, iy)] == 0;
}

std::pair<int, int> OccupancyGrid::cell_of(const Point& p) const {
  int ix = static_cast<int>(std::floor((p.x - x0_) / cell_));
  int iy = static_cast<int>(std::floor((p.y - y0_) / cell_));
  ix = std::clamp(ix, 0, nx_ - 1);
  iy = std::clamp(iy, 0, ny_ - 1);
  return {ix, iy};
}

Point OccupancyGrid::center_of(int ix, int iy) const {
  return {x0_ + (ix + 0.5) * cell_, y0_ + (iy + 0.5) * cell_};
}

std::optional<std::pair<int, int>> OccupancyGrid::nearest_free_cell(const Point& p,
                                                                    int max_ring) const {
  const auto [cx, cy] = cell_of(p);
  if (free_cell(cx, cy)) return std::make_pair(cx, cy);
  for (int ring = 1; ring <= max_ring; ++ring) {
    std::optional<std::pair<int, int>> best;
    double best_d2 = kInf;
    for (int dy = -ring; dy <= ring; ++dy) {
      for (int dx = -ring; dx <= ring; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
        if (!free_cell(cx + dx, cy + dy)) continue;
        const Point q = center_of(cx + dx, cy + dy);
        const double d2 = (q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y);
        if (d2 < best_d2) {
          best_d2 = d2;
          best = std::make_pair(cx + dx, cy + dy);
        }
      }
    }
    if (best) return best;
  }
  return std::nullopt;
}

double OccupancyGrid::shortest_path_length(const Point& a, const Point& b) const {
  const auto sa = nearest_free_cell(a);
  const auto sb = nearest_free_cell(b);
  if (!sa || !sb) return kInf;
  const int start = index(sa->first, sa->second);
  const int goal = index(sb->first, sb->second);
  if (start == goal) return 0.0;

  const double kSqrt2 = std::sqrt(2.0);
  const int gx = sb->first, gy = sb->second;
  auto heuristic = [&](int ix, int iy) {
    const double dx = std::abs(ix - gx), dy = std::abs(iy - gy);
    return std::max(dx, dy) + (kSqrt2 - 1.0) * std::min(dx, dy);
  };

  std::vector<double> dist(blocked_.size(), kInf);
  using QItem = std::pair<double, int>;  // (f, cell index)
  std::priority_queue<QItem, std::vector<QItem>, std::greater<>> open;
  dist[start] = 0.0;
  open.emplace(heuristic(sa->first, sa->second), start);

  const int ddx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  const int ddy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

  while (!open.empty()) {
    const auto [f, cur] = open.top();
    open.pop();
    if (cur == goal) return dist[cur] * cell_;
    const int cx = cur % nx_;
    const int cy = cur / nx_;
    if (f > dist[cur] + heuristic(cx, cy) + 1e-12) continue;
    for (int k = 0; k < 8; ++k) {
      const int nxp = cx + ddx[k];
      const int nyp = cy + ddy[k];
      if (!free_cell(nxp, nyp)) continue;
      // Diagonal moves must not cut a blocked corner.
      if (ddx[k] != 0 && ddy[k] != 0 &&
          (!free_cell(cx + ddx[k], cy) || !free_cell(cx, cy + ddy[k])))
        continue;
      const double w = (ddx[k] != 0 && ddy[k] != 0) ? kSqrt2 : 1.0;
      const double nd = dist[cur] + w;
      const int ni = index(nxp, nyp);
      if (nd < dist[ni]) {
        dist[ni] = nd;
        open.emplace(nd + heuristic(nxp, nyp), ni);
      }
    }
  }
  return kInf;
}

double geodesic(const OccupancyGrid& grid, const Point& a, const Point& b) {
  return grid.shortest_path_length(a, b);
}

double geodesic(const World& world, const Point& a, const Point& b) {
  require(in_free_space(world, a), "geodesic: start point not in free space");
  require(in_free_space(world, b), "geodesic: end point not in free space");
  return OccupancyGrid(world).shortest_path_length(a, b);
}

World make_world(Bounds bounds, std::vector<Circle> obstacles, double agent_radius, int ray_count,
                 double max_range, double dt) {
  require(bounds.width() > 0 && bounds.height() > 0, "make_world: degenerate bounds");
  require(agent_radius > 0, "make_world: agent radius must be > 0");
  require(ray_count >= 8, "make_world: ray count must be >= 8");
  require(max_range > 0 && dt > 0, "make_world: max range and dt must be > 0");
  for (const auto& c : obstacles) {
    require(c.r > 0, "make_world: obstacle radius must be > 0");
    require(c.x >= bounds.xmin && c.x <= bounds.xmax && c.y >= bounds.ymin && c.y <= bounds.ymax,
            "make_world: obstacle center outside bounds");
  }
  World w;
  w.bounds = bounds;
  w.obstacles = std::move(obstacles);
  w.agent_radius = agent_radius;
  w.ray_count = ray_count;
  w.max_range = max_range;
  w.dt = dt;
  return w;
}

World random_world(const RandomWorldOptions& opts, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "world-gen"));
  Bounds bounds{-opts.width / 2.0, -opts.height / 2.0, opts.width / 2.0, opts.height / 2.0};

  World w = make_world(bounds, {}, opts.agent_radius, opts.ray_count, opts.max_range, opts.dt);
  for (const auto& p : opts.keep_free) {
    require(in_free_space(w, p), "random_world: keep_free point outside usable bounds");
  }

  for (int n = 0; n < opts.n_obstacles; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < opts.max_tries_per_obstacle; ++attempt) {
      Circle c;
      c.r = rng.uniform(opts.min_obstacle_r, opts.max_obstacle_r);
      c.x = rng.uniform(bounds.xmin + c.r, bounds.xmax - c.r);
      c.y = rng.uniform(bounds.ymin + c.r, bounds.ymax - c.r);

      bool ok = true;
      for (const auto& p : opts.keep_free) {
        const double d = std::hypot(p.x - c.x, p.y - c.y);
        if (d < c.r + opts.agent_radius + opts.keep_free_clearance) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;

      World candidate = w;
      candidate.obstacles.push_back(c);
      if (opts.keep_free.size() >= 2) {
        OccupancyGrid grid(candidate);
        for (std::size_t i = 0; ok && i + 1 < opts.keep_free.size(); ++i) {
          if (!std::isfinite(geodesic(grid, opts.keep_free[i], opts.keep_free[i + 1]))) ok = false;
        }
      }
      if (!ok) continue;

      w = std::move(candidate);
      placed = true;
      break;
    }
    if (!placed)
      throw WorldGenError("random_world: could not place obstacle " + std::to_string(n) +
                          " within retry budget");
  }
  return w;
}

nlohmann::json world_to_json(const World& world) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& c : world.obstacles) obstacles.push_back({{"x", c.x}, {"y", c.y}, {"r", c.r}});
  return {
      {"bounds",
       {{"xmin", world.bounds.xmin},
        {"ymin", world.bounds.ymin},
        {"xmax", world.bounds.xmax},
        {"ymax", world.bounds.ymax}}},
      {"obstacles", obstacles},
      {"agent_radius", world.agent_radius},
      {"ray_count", world.ray_count},
      {"max_range", world.max_range},
      {"dt", world.dt},
  };
}

World world_from_json(const nlohmann::json& j) {
  Bounds b;
  b.xmin = j.at("bounds").at("xmin").get<double>();
  b.ymin = j.at("bounds").at("ymin").get<double>();
  b.xmax = j.at("bounds").at("xmax").get<double>();
  b.ymax = j.at("bounds").at("ymax").get<double>();
  std::vector<Circle> obstacles;
  for (const auto& cj : j.at("obstacles")) {
    obstacles.push_back({cj.at("x").get<double>(), cj.at("y").get<double>(), cj.at("r").get<double>()});
  }
  return make_world(b, std::move(obstacles), j.at("agent_radius").get<double>(),
                    j.at("ray_count").get<int>(), j.at("max_range").get<double>(),
                    j.at("dt").get<double>());
}

World load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_world: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_world: bad JSON in " + path + ": " + e.what());
  }
  return world_from_json(j);
}

void save_world(const World& world, const std::string& path, const nlohmann::json& meta) {
  nlohmann::json j = world_to_json(world);
  if (!meta.is_null()) j["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw IoError("save_world: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace recon::sim
