#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recon/eval.hpp"

#include "json.hpp"

namespace recon::eval {

struct WorldEntry {
  std::string id;
  std::string spec_path;  // either a spec file...
  std::uint64_t seed = 0;  // ...or a generator seed
  bool from_seed = false;
  double width = 24.0;
  double height = 24.0;
  int n_obstacles = 13;
  sim::Pose start;
  sim::Point goal;
  bool has_endpoints = false;  // otherwise opposite-corner defaults
};

struct ExperimentConfig {
  std::vector<std::string> methods;
  std::vector<WorldEntry> worlds;
  std::vector<std::uint64_t> seeds;
  std::string ckpt_path;
  std::string vanilla_ckpt_path;  // required when methods include "vanilla"
  long budget = 1000;
  long nav_budget = 400;
  std::string out_dir;
  agent::ExploreConfig base_cfg;
};

ExperimentConfig load_experiment_config(const std::string& path);

// World plus endpoints, materialized from an entry.
struct MaterializedWorld {
  sim::World world;
  std::string id;
  sim::Pose start;
  sim::Point goal;
};
MaterializedWorld materialize_world(const WorldEntry& entry);

// Runs the full methods x worlds x seeds cross product, writing one
// run_<method>_<world>_<seed>.json per run plus the aggregate tables.
// Returns the reports in execution order.
std::vector<RunReport> run_experiment(const ExperimentConfig& cfg);

struct AggregateRow {
  std::string method;
  long runs = 0;
  long discovered = 0;
  double median_exploration_steps = 0.0;
  double median_navigation_steps = 0.0;  // over discovered runs; NaN-free: 0 when none
  double mean_sct = 0.0;                 // over discovered runs, failures count 0
};

std::vector<AggregateRow> aggregate_reports(const std::vector<RunReport>& reports);

// aggregate.csv and coverage_curves.csv; deterministic ordering.
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path);
void write_coverage_csv(const std::vector<RunReport>& reports, const std::string& path);

// Re-aggregates a directory of run_*.json files.
std::vector<RunReport> load_reports_dir(const std::string& dir);

double median(std::vector<double> v);

}  // namespace recon::eval
