#include "recon/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "recon/errors.hpp"

namespace recon::eval {

namespace fs = std::filesystem;

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_experiment_config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_experiment_config: bad JSON in " + path + ": " + e.what());
  }

  ExperimentConfig cfg;
  cfg.methods = j.at("methods").get<std::vector<std::string>>();
  for (const auto& m : cfg.methods) method_from_string(m);  // validate early
  for (const auto& wj : j.at("worlds")) {
    WorldEntry e;
    e.id = wj.at("id").get<std::string>();
    if (wj.contains("spec")) {
      e.spec_path = wj.at("spec").get<std::string>();
    } else {
      e.from_seed = true;
      e.seed = wj.at("seed").get<std::uint64_t>();
      e.width = wj.value("width", e.width);
      e.height = wj.value("height", e.height);
      e.n_obstacles = wj.value("obstacles", e.n_obstacles);
    }
    if (wj.contains("start")) {
      const auto s = wj.at("start");
      e.start = {s.at(0).get<double>(), s.at(1).get<double>(),
                 s.size() > 2 ? s.at(2).get<double>() : 0.0};
      const auto g = wj.at("goal");
      e.goal = {g.at(0).get<double>(), g.at(1).get<double>()};
      e.has_endpoints = true;
    }
    cfg.worlds.push_back(std::move(e));
  }
  cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  cfg.ckpt_path = j.at("ckpt").get<std::string>();
  cfg.vanilla_ckpt_path = j.value("vanilla_ckpt", "");
  cfg.budget = j.value("budget", cfg.budget);
  cfg.nav_budget = j.value("nav_budget", cfg.nav_budget);
  cfg.out_dir = j.at("out_dir").get<std::string>();
  return cfg;
}

MaterializedWorld materialize_world(const WorldEntry& entry) {
  MaterializedWorld m;
  m.id = entry.id;
  if (entry.from_seed) {
    sim::RandomWorldOptions opts;
    opts.width = entry.width;
    opts.height = entry.height;
    opts.n_obstacles = entry.n_obstacles;
    const double inset = 1.2;
    sim::Pose start = entry.start;
    sim::Point goal = entry.goal;
    if (!entry.has_endpoints) {
      start = {-entry.width / 2.0 + inset, -entry.height / 2.0 + inset, sim::kPi / 4.0};
      goal = {entry.width / 2.0 - inset, entry.height / 2.0 - inset};
    }
    opts.keep_free = {{start.x, start.y}, {goal.x, goal.y}};
    m.world = sim::random_world(opts, entry.seed);
    m.start = start;
    m.goal = goal;
  } else {
    m.world = sim::load_world(entry.spec_path);
    require(entry.has_endpoints, "materialize_world: spec worlds need explicit start/goal");
    m.start = entry.start;
    m.goal = entry.goal;
  }
  return m;
}

std::vector<RunReport> run_experiment(const ExperimentConfig& cfg) {
  const auto ckpt = model::load_checkpoint(cfg.ckpt_path);
  model::ModelParams vanilla_ckpt;
  bool have_vanilla = false;
  for (const auto& ms : cfg.methods) {
    if (method_from_string(ms) == Method::kVanilla) {
      require(!cfg.vanilla_ckpt_path.empty(),
              "run_experiment: methods include vanilla but no vanilla_ckpt given");
      vanilla_ckpt = model::load_checkpoint(cfg.vanilla_ckpt_path);
      have_vanilla = true;
      break;
    }
  }

  fs::create_directories(cfg.out_dir);
  std::vector<RunReport> reports;

  for (const auto& entry : cfg.worlds) {
    const auto mw = materialize_world(entry);
    for (const auto& ms : cfg.methods) {
      const Method method = method_from_string(ms);
      for (const auto seed : cfg.seeds) {
        RunSetup setup;
        setup.world = mw.world;
        setup.world_id = mw.id;
        setup.start = mw.start;
        setup.goal = mw.goal;
        setup.cfg = cfg.base_cfg;
        setup.cfg.step_budget = cfg.budget;
        setup.cfg.nav_step_budget = cfg.nav_budget;
        const auto& params = (method == Method::kVanilla && have_vanilla) ? vanilla_ckpt : ckpt;
        RunReport r = run_method(method, setup, params, seed);
        const std::string name =
            "run_" + ms + "_" + mw.id + "_" + std::to_string(seed) + ".json";
        save_report(r, (fs::path(cfg.out_dir) / name).string());
        reports.push_back(std::move(r));
      }
    }
  }

  write_aggregate_csv(aggregate_reports(reports),
                      (fs::path(cfg.out_dir) / "aggregate.csv").string());
  write_coverage_csv(reports, (fs::path(cfg.out_dir) / "coverage_curves.csv").string());
  return reports;
}

std::vector<AggregateRow> aggregate_reports(const std::vector<RunReport>& reports) {
  std::map<std::string, std::vector<const RunReport*>> by_method;
  for (const auto& r : reports) by_method[r.method].push_back(&r);

  std::vector<AggregateRow> rows;
  for (const auto& [method, rs] : by_method) {
    AggregateRow row;
    row.method = method;
    row.runs = static_cast<long>(rs.size());
    std::vector<double> expl, nav, scts;
    for (const auto* r : rs) {
      expl.push_back(static_cast<double>(r->exploration_steps));
      if (r->discovered) {
        row.discovered += 1;
        nav.push_back(static_cast<double>(r->navigation_steps));
        scts.push_back(r->sct);
      }
    }
    row.median_exploration_steps = median(expl);
    row.median_navigation_steps = median(nav);
    row.mean_sct = scts.empty() ? 0.0
                                : std::accumulate(scts.begin(), scts.end(), 0.0) /
                                      static_cast<double>(scts.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_aggregate_csv: cannot open " + path);
  out << "method,runs,discovered,median_exploration_steps,median_navigation_steps,mean_sct\n";
  for (const auto& r : rows) {
    std::ostringstream line;
    line << r.method << "," << r.runs << "," << r.discovered << ","
         << r.median_exploration_steps << "," << r.median_navigation_steps << "," << r.mean_sct;
    out << line.str() << "\n";
  }
}

void write_coverage_csv(const std::vector<RunReport>& reports, const std::string& path) {
  // Runs stop at different steps; a finished run keeps its final coverage.
  std::map<std::string, std::vector<const RunReport*>> by_method;
  for (const auto& r : reports)
    if (!r.coverage_trace.empty()) by_method[r.method].push_back(&r);

  long max_step = 0;
  long stride = 0;
  for (const auto& [m, rs] : by_method) {
    for (const auto* r : rs) {
      max_step = std::max(max_step, r->coverage_trace.back().first);
      if (r->coverage_trace.size() >= 2)
        stride = std::max(stride, r->coverage_trace[1].first - r->coverage_trace[0].first);
    }
  }
  if (stride == 0) stride = 1;

  std::ofstream out(path);
  if (!out) throw IoError("write_coverage_csv: cannot open " + path);
  out << "method,step,median_coverage\n";
  for (const auto& [method, rs] : by_method) {
    for (long step = 0; step <= max_step; step += stride) {
      std::vector<double> vals;
      for (const auto* r : rs) {
        double v = 0.0;
        for (const auto& [s, c] : r->coverage_trace) {
          if (s <= step) v = c;
          else break;
        }
        vals.push_back(v);
      }
      out << method << "," << step << "," << median(vals) << "\n";
    }
  }
}

std::vector<RunReport> load_reports_dir(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("run_", 0) == 0 && e.path().extension() == ".json")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  std::vector<RunReport> reports;
  for (const auto& f : files) reports.push_back(load_report(f));
  return reports;
}

}  // namespace recon::eval
