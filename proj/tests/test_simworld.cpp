#include <cmath>

#include "recon/errors.hpp"
#include "recon/world.hpp"

#include "doctest.h"

using namespace recon;
using sim::Action;
using sim::Bounds;
using sim::Circle;
using sim::Pose;
using sim::World;

namespace {
World empty_world(double half = 10.0) {
  return sim::make_world({-half, -half, half, half}, {});
}
}  // namespace

TEST_CASE("step: zero action leaves pose unchanged") {
  const World w = empty_world();
  const Pose p{1.0, -2.0, 0.7};
  const auto res = sim::step(w, p, Action{0.0, 0.0});
  CHECK(res.pose.x == p.x);
  CHECK(res.pose.y == p.y);
  CHECK(res.pose.theta == doctest::Approx(p.theta));
  CHECK_FALSE(res.collided);
}

TEST_CASE("step: straight motion integrates v*cos(theta)*dt") {
  const World w = empty_world();
  const auto res = sim::step(w, Pose{0, 0, 0}, Action{1.0, 0.0});
  CHECK(res.pose.x == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(res.pose.y == doctest::Approx(0.0));
  CHECK_FALSE(res.collided);
}

TEST_CASE("step: clamps actions to the box") {
  const World w = empty_world();
  const auto res = sim::step(w, Pose{0, 0, 0}, Action{5.0, -9.0});
  CHECK(res.pose.x == doctest::Approx(0.5));          // v clamped to 1
  CHECK(res.pose.theta == doctest::Approx(-0.5));     // w clamped to -1
}

TEST_CASE("step: stops at contact with a bounds wall 0.3 m ahead") {
  const World w = empty_world(5.0);
  // Inset wall for the agent disc sits at x = 5 - 0.25 = 4.75.
  const Pose p{4.45, 0.0, 0.0};
  const auto res = sim::step(w, p, Action{1.0, 0.0});
  CHECK(res.collided);
  CHECK(res.pose.x == doctest::Approx(4.75).epsilon(1e-6));
  CHECK(sim::in_free_space(w, {res.pose.x, res.pose.y}));
}

TEST_CASE("step: stops at contact with an obstacle, geometric oracle") {
  World w = sim::make_world({-5, -5, 5, 5}, {{2.0, 0.0, 0.5}});
  // Contact when center-to-center distance reaches 0.75, i.e. x = 1.25.
  const Pose p{1.05, 0.0, 0.0};
  const auto res = sim::step(w, p, Action{1.0, 0.0});
  CHECK(res.collided);
  CHECK(res.pose.x == doctest::Approx(1.25).epsilon(1e-6));
  const double clearance = std::hypot(res.pose.x - 2.0, res.pose.y) - 0.75;
  CHECK(clearance >= 0.0);
}

TEST_CASE("step: never leaves a pose overlapping obstacles (random walks)") {
  sim::RandomWorldOptions opts;
  opts.width = 12;
  opts.height = 12;
  opts.n_obstacles = 8;
  opts.keep_free = {{-4.5, -4.5}};
  const World w = sim::random_world(opts, 99);
  Rng rng(4);
  Pose p{-4.5, -4.5, 0.0};
  for (int i = 0; i < 2000; ++i) {
    const auto res = sim::step(w, p, Action{rng.uniform(0, 1), rng.uniform(-1, 1)});
    p = res.pose;
    for (const auto& c : w.obstacles) {
      const double d = std::hypot(p.x - c.x, p.y - c.y);
      CHECK(d >= c.r + w.agent_radius - 1e-7);
    }
    CHECK(p.x >= w.bounds.xmin + w.agent_radius - 1e-7);
    CHECK(p.x <= w.bounds.xmax - w.agent_radius + 1e-7);
  }
}

TEST_CASE("observe: far from everything gives all ones") {
  const World w = empty_world(50.0);
  const auto obs = sim::observe(w, Pose{0, 0, 0.3});
  REQUIRE(obs.rays.size() == 32);
  for (double r : obs.rays) CHECK(r == 1.0);
}

TEST_CASE("observe: wall 5 m dead ahead reads 0.5 of max range") {
  const World w = sim::make_world({-50, -50, 5, 50}, {});
  const auto obs = sim::observe(w, Pose{0, 0, 0});
  CHECK(obs.rays[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("observe: matches a dense ray-march oracle on a cluttered world") {
  sim::RandomWorldOptions opts;
  opts.width = 16;
  opts.height = 16;
  opts.n_obstacles = 9;
  opts.keep_free = {{0.0, 0.0}};
  const World w = sim::random_world(opts, 2718);
  const Pose pose{0.0, 0.0, 0.37};
  const auto obs = sim::observe(w, pose);

  for (int k = 0; k < w.ray_count; ++k) {
    const double bearing = pose.theta + 2.0 * sim::kPi * k / w.ray_count;
    const double ux = std::cos(bearing), uy = std::sin(bearing);
    double hit = w.max_range;
    const double dt = 5e-4;
    for (double t = 0.0; t <= w.max_range; t += dt) {
      const double x = pose.x + t * ux, y = pose.y + t * uy;
      bool blocked = x < w.bounds.xmin || x > w.bounds.xmax || y < w.bounds.ymin ||
                     y > w.bounds.ymax;
      for (const auto& c : w.obstacles) {
        if (blocked) break;
        const double dx = x - c.x, dy = y - c.y;
        if (dx * dx + dy * dy <= c.r * c.r) blocked = true;
      }
      if (blocked) {
        hit = t;
        break;
      }
    }
    CHECK(obs.rays[k] == doctest::Approx(hit / w.max_range).epsilon(1e-3));
  }
}

TEST_CASE("observe: invariant to joint translation") {
  World w = sim::make_world({-8, -8, 8, 8}, {{1.0, 2.0, 0.8}, {-3.0, 0.5, 1.1}});
  const Pose p{0.5, -1.0, 1.1};
  const auto base = sim::observe(w, p);

  const double dx = 2.5, dy = -1.75;
  World wt = sim::make_world({-8 + dx, -8 + dy, 8 + dx, 8 + dy},
                             {{1.0 + dx, 2.0 + dy, 0.8}, {-3.0 + dx, 0.5 + dy, 1.1}});
  const auto moved = sim::observe(wt, Pose{p.x + dx, p.y + dy, p.theta});
  for (int k = 0; k < w.ray_count; ++k)
    CHECK(moved.rays[k] == doctest::Approx(base.rays[k]).epsilon(1e-9));
}

TEST_CASE("observe: rotating by one ray spacing cyclically shifts the scan") {
  World w = sim::make_world({-8, -8, 8, 8}, {{1.0, 2.0, 0.8}, {-3.0, 0.5, 1.1}});
  const Pose p{0.5, -1.0, 0.4};
  const auto base = sim::observe(w, p);
  const auto rotated = sim::observe(w, Pose{p.x, p.y, p.theta + 2.0 * sim::kPi / w.ray_count});
  for (int k = 0; k < w.ray_count; ++k)
    CHECK(rotated.rays[k] == doctest::Approx(base.rays[(k + 1) % w.ray_count]).epsilon(1e-9));
}

TEST_CASE("geodesic: identical points give zero") {
  const World w = empty_world();
  CHECK(sim::geodesic(w, {1.0, 1.0}, {1.0, 1.0}) == 0.0);
}

TEST_CASE("geodesic: empty world 3-4-5 within grid tolerance") {
  const World w = empty_world();
  const double g = sim::geodesic(w, {0.0, 0.0}, {3.0, 4.0});
  CHECK(g >= 5.0);
  CHECK(g <= 5.0 * 1.05);
}

TEST_CASE("geodesic: detour around a blocking disc exceeds the euclidean distance") {
  const World w = sim::make_world({-6, -6, 6, 6}, {{0.0, 0.0, 2.0}});
  const double g = sim::geodesic(w, {-4.0, 0.0}, {4.0, 0.0});
  CHECK(std::isfinite(g));
  CHECK(g > 8.0 + 0.5);  // clearly longer than the straight line
}

TEST_CASE("geodesic: at least euclidean and triangle inequality within tolerance") {
  sim::RandomWorldOptions opts;
  opts.width = 14;
  opts.height = 14;
  opts.n_obstacles = 6;
  opts.keep_free = {{-5, -5}, {5, 5}};
  const World w = sim::random_world(opts, 51);
  const sim::OccupancyGrid grid(w);
  Rng rng(8);
  const double tol = 4.0 * grid.cell();
  int checked = 0;
  while (checked < 20) {
    sim::Point a{rng.uniform(-6, 6), rng.uniform(-6, 6)};
    sim::Point b{rng.uniform(-6, 6), rng.uniform(-6, 6)};
    sim::Point c{rng.uniform(-6, 6), rng.uniform(-6, 6)};
    if (!sim::in_free_space(w, a) || !sim::in_free_space(w, b) || !sim::in_free_space(w, c))
      continue;
    const double ab = sim::geodesic(grid, a, b);
    const double bc = sim::geodesic(grid, b, c);
    const double ac = sim::geodesic(grid, a, c);
    if (!std::isfinite(ab) || !std::isfinite(bc) || !std::isfinite(ac)) continue;
    CHECK(ab + tol >= std::hypot(a.x - b.x, a.y - b.y));
    CHECK(ac <= ab + bc + tol);
    ++checked;
  }
}

TEST_CASE("geodesic: querying a point inside an obstacle is a contract violation") {
  const World w = sim::make_world({-5, -5, 5, 5}, {{0.0, 0.0, 1.0}});
  CHECK_THROWS_AS(sim::geodesic(w, {0.0, 0.0}, {3.0, 3.0}), ContractViolation);
}

TEST_CASE("make_world: zero obstacles and validation errors") {
  const World w = empty_world();
  CHECK(w.obstacles.empty());
  CHECK_THROWS_AS(sim::make_world({-5, -5, 5, 5}, {}, 0.25, 4), ContractViolation);
  CHECK_THROWS_AS(sim::make_world({-5, -5, 5, 5}, {{9.0, 0.0, 0.5}}), ContractViolation);
  CHECK_THROWS_AS(sim::make_world({-5, -5, 5, 5}, {{0.0, 0.0, -0.5}}), ContractViolation);
}

TEST_CASE("random_world: fixed seed reproduces the world, connectivity holds") {
  sim::RandomWorldOptions opts;
  opts.width = 20;
  opts.height = 20;
  opts.n_obstacles = 12;
  opts.keep_free = {{-8.8, -8.8}, {8.8, 8.8}};
  const World a = sim::random_world(opts, 7);
  const World b = sim::random_world(opts, 7);
  CHECK(sim::world_to_json(a).dump() == sim::world_to_json(b).dump());
  CHECK(a.obstacles.size() == 12);
  CHECK(std::isfinite(sim::geodesic(a, {-8.8, -8.8}, {8.8, 8.8})));

  const World c = sim::random_world(opts, 8);
  CHECK(sim::world_to_json(a).dump() != sim::world_to_json(c).dump());
}

TEST_CASE("world json round-trips") {
  sim::RandomWorldOptions opts;
  opts.n_obstacles = 5;
  const World w = sim::random_world(opts, 3);
  const World back = sim::world_from_json(sim::world_to_json(w));
  CHECK(sim::world_to_json(back).dump() == sim::world_to_json(w).dump());
}

TEST_CASE("wrap_angle keeps angles in (-pi, pi]") {
  CHECK(sim::wrap_angle(sim::kPi) == doctest::Approx(sim::kPi));
  CHECK(sim::wrap_angle(-sim::kPi) == doctest::Approx(sim::kPi));
  CHECK(sim::wrap_angle(3 * sim::kPi) == doctest::Approx(sim::kPi));
  CHECK(sim::wrap_angle(0.5) == doctest::Approx(0.5));
  CHECK(sim::wrap_angle(2 * sim::kPi + 0.25) == doctest::Approx(0.25));
}
