#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recon/rng.hpp"

#include "json.hpp"

namespace recon::sim {

inline constexpr double kVMax = 1.0;   // m/s, v >= 0
inline constexpr double kWMax = 1.0;   // rad/s
inline constexpr double kPi = 3.14159265358979323846;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Heading normalized to (-pi, pi].
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

double wrap_angle(double a);

struct Action {
  double v = 0.0;  // clamped to [0, kVMax]
  double w = 0.0;  // clamped to [-kWMax, kWMax]

  static Action clamped(double v, double w);
};

// Egocentric range scan, each ray normalized by max range into [0, 1].
// Ray k points along theta + 2*pi*k/K.
struct Observation {
  std::vector<double> rays;
};

struct Circle {
  double x = 0.0;
  double y = 0.0;
  double r = 0.0;
};

struct Bounds {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

// Immutable after construction. Obstacles are circles; the agent is a disc.
struct World {
  Bounds bounds;
  std::vector<Circle> obstacles;
  double agent_radius = 0.25;
  int ray_count = 32;
  double max_range = 10.0;
  double dt = 0.5;
};

struct StepResult {
  Pose pose;
  bool collided = false;
};

// Unicycle integration with collision stop-at-contact. Rotation always
// applies; translation is cut at the first contact with an inflated obstacle
// or the inset bounds, leaving nonnegative clearance.
StepResult step(const World& world, const Pose& pose, const Action& action);

Observation observe(const World& world, const Pose& pose);

// True if a disc of agent_radius at p fits in free space.
bool in_free_space(const World& world, const Point& p);

// Occupancy grid used by the geodesic oracle and coverage metric.
// Cell size is agent_radius / 2; a cell is blocked when its center is within
// the inflated obstacle set or outside the inset bounds.
class OccupancyGrid {
 public:
  explicit OccupancyGrid(const World& world);

  double cell() const { return cell_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  bool free_cell(int ix, int iy) const;
  int free_cell_count() const { return free_count_; }
  std::pair<int, int> cell_of(const Point& p) const;
  Point center_of(int ix, int iy) const;
  std::optional<std::pair<int, int>> nearest_free_cell(const Point& p, int max_ring = 3) const;

  // 8-connected A* path length in meters; +infinity when disconnected.
  double shortest_path_length(const Point& a, const Point& b) const;

 private:
  int index(int ix, int iy) const { return iy * nx_ + ix; }

  double cell_;
  int nx_, ny_;
  double x0_, y0_;
  int free_count_ = 0;
  std::vector<std::uint8_t> blocked_;
};

// Shortest collision-free path length between two free points; +infinity if
// disconnected. Evaluation oracle only; agents never see it.
double geodesic(const World& world, const Point& a, const Point& b);
double geodesic(const OccupancyGrid& grid, const Point& a, const Point& b);

// Validated construction from explicit fields. Throws on invariant breaches.
World make_world(Bounds bounds, std::vector<Circle> obstacles, double agent_radius = 0.25,
                 int ray_count = 32, double max_range = 10.0, double dt = 0.5);

struct RandomWorldOptions {
  double width = 20.0;
  double height = 20.0;
  int n_obstacles = 12;
  double min_obstacle_r = 0.4;
  double max_obstacle_r = 1.2;
  double agent_radius = 0.25;
  int ray_count = 32;
  double max_range = 10.0;
  double dt = 0.5;
  // Points kept in free space and mutually connected (e.g. start and goal).
  std::vector<Point> keep_free;
  double keep_free_clearance = 1.0;
  int max_tries_per_obstacle = 200;
};

// Seeded random world; identical seed gives an identical world.
World random_world(const RandomWorldOptions& opts, std::uint64_t seed);

nlohmann::json world_to_json(const World& world);
World world_from_json(const nlohmann::json& j);
World load_world(const std::string& path);
void save_world(const World& world, const std::string& path,
                const nlohmann::json& meta = nlohmann::json());

}  // namespace recon::sim
