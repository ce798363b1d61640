#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "recon/datagen.hpp"
#include "recon/errors.hpp"

#include "doctest.h"

using namespace recon;
using data::CollectOptions;
using data::Trajectory;
using sim::Action;
using sim::World;

TEST_CASE("random_walk_action: rho=1 keeps the action constant") {
  Rng rng(1);
  Action a{0.4, -0.2};
  for (int i = 0; i < 10; ++i) {
    a = data::random_walk_action(a, rng, 1.0);
    CHECK(a.v == doctest::Approx(0.4));
    CHECK(a.w == doctest::Approx(-0.2));
  }
}

TEST_CASE("random_walk_action: rho=0 gives fresh uniform draws in the box") {
  Rng rng(2);
  Action prev{0.0, 0.0};
  double mean_v = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const Action a = data::random_walk_action(prev, rng, 0.0);
    CHECK(a.v >= 0.0);
    CHECK(a.v <= sim::kVMax);
    CHECK(a.w >= -sim::kWMax);
    CHECK(a.w <= sim::kWMax);
    mean_v += a.v;
  }
  CHECK(mean_v / n == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("random_walk_action: lag-1 autocorrelation near rho") {
  Rng rng(3);
  Action a{0.5, 0.0};
  for (int i = 0; i < 200; ++i) a = data::random_walk_action(a, rng, 0.9);  // burn-in
  const int n = 10000;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    a = data::random_walk_action(a, rng, 0.9);
    v[i] = a.v;
  }
  double mean = 0;
  for (double x : v) mean += x;
  mean /= n;
  double num = 0, den = 0;
  for (int i = 0; i + 1 < n; ++i) num += (v[i] - mean) * (v[i + 1] - mean);
  for (int i = 0; i < n; ++i) den += (v[i] - mean) * (v[i] - mean);
  const double rho1 = num / den;
  CHECK(rho1 >= 0.85);
  CHECK(rho1 <= 0.95);
}

TEST_CASE("collect: empty world segments at the max trajectory length") {
  const World w = sim::make_world({-200, -200, 200, 200}, {});
  const auto trajs = data::collect(w, {0, 0, 0}, 11, {.n_steps = 350});
  REQUIRE(trajs.size() == 4);
  for (const auto& t : trajs) CHECK_FALSE(t.collision_terminated);
  CHECK(trajs[0].acts.size() == 100);
  CHECK(trajs[1].acts.size() == 100);
  CHECK(trajs[2].acts.size() == 100);
  CHECK(trajs[3].acts.size() == 50);
  for (const auto& t : trajs) CHECK(t.obs.size() == t.acts.size() + 1);
}

TEST_CASE("collect: corridor world produces a collision-terminated trajectory") {
  const World w = sim::make_world({-6, -1.5, 6, 1.5}, {});
  const auto trajs = data::collect(w, {-5, 0, 0}, 5, {.n_steps = 1000});
  bool any_collision = false;
  for (const auto& t : trajs) any_collision |= t.collision_terminated;
  CHECK(any_collision);
}

TEST_CASE("collect: deterministic under a fixed seed") {
  sim::RandomWorldOptions opts;
  opts.width = 10;
  opts.height = 10;
  opts.n_obstacles = 5;
  opts.keep_free = {{-3.5, -3.5}};
  const World w = sim::random_world(opts, 21);
  const auto a = data::collect(w, {-3.5, -3.5, 0}, 77, {.n_steps = 500});
  const auto b = data::collect(w, {-3.5, -3.5, 0}, 77, {.n_steps = 500});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].collision_terminated == b[i].collision_terminated);
    REQUIRE(a[i].obs.size() == b[i].obs.size());
    for (std::size_t j = 0; j < a[i].obs.size(); ++j)
      CHECK(a[i].obs[j].rays == b[i].obs[j].rays);
  }
}

namespace {
// Trajectory with the step index stamped into each observation.
Trajectory indexed_trajectory(int n_obs) {
  Trajectory t;
  for (int i = 0; i < n_obs; ++i) t.obs.push_back({{static_cast<double>(i)}});
  for (int i = 0; i + 1 < n_obs; ++i) t.acts.push_back({0.1 * i, 0.0});
  return t;
}
}  // namespace

TEST_CASE("relabel: three observations give exactly three quadruples") {
  const auto quads = data::relabel(indexed_trajectory(3), 50);
  REQUIRE(quads.size() == 3);
  std::vector<int> ds;
  for (const auto& q : quads) {
    CHECK(q.g.rays[0] - q.o.rays[0] == doctest::Approx(q.d));
    ds.push_back(q.d);
  }
  std::sort(ds.begin(), ds.end());
  CHECK(ds == std::vector<int>{1, 1, 2});
}

TEST_CASE("relabel: window of one gives one quadruple per step, all d=1") {
  const auto quads = data::relabel(indexed_trajectory(7), 1);
  REQUIRE(quads.size() == 6);
  for (const auto& q : quads) CHECK(q.d == 1);
}

TEST_CASE("relabel: full window count and gap histogram match enumeration") {
  const int L = 23;
  const auto quads = data::relabel(indexed_trajectory(L), 100);
  // Independent enumeration of (t, g) pairs.
  std::vector<int> expected_hist(L, 0);
  long expected_count = 0;
  for (int t = 0; t < L; ++t)
    for (int g = t + 1; g < L; ++g) {
      ++expected_count;
      ++expected_hist[g - t];
    }
  CHECK(expected_count == static_cast<long>(L) * (L - 1) / 2);
  REQUIRE(quads.size() == static_cast<std::size_t>(expected_count));
  std::vector<int> hist(L, 0);
  for (const auto& q : quads) {
    ++hist[q.d];
    CHECK(q.g.rays[0] - q.o.rays[0] == doctest::Approx(q.d));
    // The labeled action is the one taken at the source index.
    CHECK(q.a.v == doctest::Approx(0.1 * q.o.rays[0]));
  }
  CHECK(hist == expected_hist);
}

TEST_CASE("relabel: capped window never crosses it") {
  const auto quads = data::relabel(indexed_trajectory(40), 5);
  for (const auto& q : quads) {
    CHECK(q.d >= 1);
    CHECK(q.d <= 5);
  }
}

TEST_CASE("relabel: t_max below one is a contract violation") {
  CHECK_THROWS_AS(data::relabel(indexed_trajectory(3), 0), ContractViolation);
}

TEST_CASE("dataset and trajectory files round-trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "recon_datagen_test";
  fs::create_directories(dir);

  const World w = sim::make_world({-6, -1.5, 6, 1.5}, {});
  const auto trajs = data::collect(w, {-5, 0, 0}, 5, {.n_steps = 300});
  data::Dataset ds = data::relabel_all(trajs, 10);
  REQUIRE_FALSE(ds.quads.empty());

  const std::string dpath = (dir / "data.jsonl").string();
  data::save_dataset(ds, dpath);
  const auto ds2 = data::load_dataset(dpath);
  REQUIRE(ds2.quads.size() == ds.quads.size());
  for (std::size_t i = 0; i < ds.quads.size(); ++i) {
    CHECK(ds.quads[i].o.rays == ds2.quads[i].o.rays);
    CHECK(ds.quads[i].a.v == ds2.quads[i].a.v);
    CHECK(ds.quads[i].d == ds2.quads[i].d);
  }

  const std::string tpath = (dir / "trajs.jsonl").string();
  data::save_trajectories(trajs, tpath);
  const auto trajs2 = data::load_trajectories(tpath);
  REQUIRE(trajs2.size() == trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    CHECK(trajs[i].collision_terminated == trajs2[i].collision_terminated);
    CHECK(trajs[i].obs.back().rays == trajs2[i].obs.back().rays);
  }
  fs::remove_all(dir);
}
