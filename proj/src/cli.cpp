#include "recon/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "recon/agent.hpp"
#include "recon/datagen.hpp"
#include "recon/errors.hpp"
#include "recon/experiment.hpp"
#include "recon/manifest.hpp"

#include "CLI11.hpp"

namespace recon::cli {

namespace fs = std::filesystem;

namespace {

std::vector<double> parse_csv_numbers(const std::string& s, std::size_t lo, std::size_t hi,
                                      const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ContractViolation(what + ": cannot parse '" + s + "'");
    }
  }
  if (out.size() < lo || out.size() > hi)
    throw ContractViolation(what + ": expected " + std::to_string(lo) + ".." +
                            std::to_string(hi) + " comma-separated numbers, got '" + s + "'");
  return out;
}

sim::Pose parse_pose(const std::string& s) {
  const auto v = parse_csv_numbers(s, 2, 3, "pose");
  return {v[0], v[1], v.size() > 2 ? v[2] : 0.0};
}

sim::Point parse_point(const std::string& s) {
  const auto v = parse_csv_numbers(s, 2, 2, "point");
  return {v[0], v[1]};
}

sim::Pose default_start(const sim::World& w) {
  return {w.bounds.xmin + 1.2, w.bounds.ymin + 1.2, sim::kPi / 4.0};
}

struct Ctx {
  std::string config_hash;
};

void cmd_make_world(const Ctx& ctx, std::uint64_t seed, bool have_seed, const std::string& spec,
                    const std::string& out, double width, double height, int obstacles,
                    bool no_anchors) {
  sim::World world;
  if (have_seed) {
    sim::RandomWorldOptions opts;
    opts.width = width;
    opts.height = height;
    opts.n_obstacles = obstacles;
    if (!no_anchors) {
      const double inset = 1.2;
      opts.keep_free = {{-width / 2 + inset, -height / 2 + inset},
                        {width / 2 - inset, height / 2 - inset}};
    }
    world = sim::random_world(opts, seed);
  } else {
    if (spec.empty()) throw ContractViolation("make-world: need --seed or --spec");
    world = sim::load_world(spec);
  }
  sim::save_world(world, out, {{"seed", seed}, {"config_hash", ctx.config_hash}});
  write_manifest(make_manifest("make-world", spec.empty() ? std::vector<std::string>{}
                                                          : std::vector<std::string>{spec},
                               {out}, seed, ctx.config_hash),
                 out + ".manifest.json");
  std::cout << "wrote " << out << " (" << world.obstacles.size() << " obstacles, "
            << world.bounds.width() << "x" << world.bounds.height() << " m)\n";
}

void cmd_collect(const Ctx& ctx, const std::string& world_path, const std::string& start_str,
                 long steps, std::uint64_t seed, const std::string& out,
                 const std::string& traj_out, int t_max) {
  const auto world = sim::load_world(world_path);
  const sim::Pose start = start_str.empty() ? default_start(world) : parse_pose(start_str);
  const auto trajs = data::collect(world, start, seed, {.n_steps = steps});
  data::Dataset ds = data::relabel_all(trajs, t_max);
  ds.collect_seed = seed;
  ds.source_steps = steps;
  data::save_dataset(ds, out);
  std::vector<std::string> outputs{out};
  if (!traj_out.empty()) {
    data::save_trajectories(trajs, traj_out);
    outputs.push_back(traj_out);
  }
  write_manifest(make_manifest("collect", {world_path}, outputs, seed, ctx.config_hash),
                 out + ".manifest.json");
  std::cout << "collected " << trajs.size() << " trajectories, " << ds.quads.size()
            << " quadruples -> " << out << "\n";
}

void cmd_train(const Ctx& ctx, const std::string& data_path, int epochs, double beta,
               std::uint64_t seed, const std::string& out, int latent_dim, int hidden, double lr,
               int batch) {
  const auto ds = data::load_dataset(data_path);
  if (ds.quads.empty()) throw IoError("train: dataset is empty: " + data_path);
  const int obs_dim = static_cast<int>(ds.quads.front().o.rays.size());
  auto params = model::make_model(obs_dim, latent_dim, beta, seed, hidden);
  model::TrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = batch;
  opts.lr = lr;
  opts.seed = seed;
  const auto trace = model::train(params, ds, opts);
  model::save_checkpoint(params, out,
                         {{"dataset", data_path},
                          {"dataset_hash", file_hash_hex(data_path)},
                          {"epochs", epochs},
                          {"seed", seed},
                          {"config_hash", ctx.config_hash},
                          {"loss_trace", trace.epoch_loss}});
  write_manifest(make_manifest("train", {data_path}, {out}, seed, ctx.config_hash),
                 out + ".manifest.json");
  std::cout << "trained " << epochs << " epochs on " << ds.quads.size()
            << " quadruples; loss " << (trace.epoch_loss.empty() ? 0.0 : trace.epoch_loss.front())
            << " -> " << (trace.epoch_loss.empty() ? 0.0 : trace.epoch_loss.back()) << "; wrote "
            << out << "\n";
}

void cmd_explore(const Ctx& ctx, const std::string& world_path, const std::string& ckpt_path,
                 const std::string& goal_str, const std::string& start_str, long budget,
                 std::uint64_t seed, const std::string& out_dir) {
  const auto world = sim::load_world(world_path);
  const auto ckpt = model::load_checkpoint(ckpt_path);
  const sim::Point goal = parse_point(goal_str);
  const sim::Pose start = start_str.empty() ? default_start(world) : parse_pose(start_str);
  require(sim::in_free_space(world, goal), "explore: goal point not in free space");

  agent::ExploreConfig cfg;
  cfg.step_budget = budget;
  cfg.seed = seed;
  cfg.beta = ckpt.beta;

  agent::SimSession session(world, start);
  const auto o_goal = sim::observe(world, {goal.x, goal.y, 0.0});
  auto result = agent::explore(session, ckpt, o_goal, goal, cfg);

  fs::create_directories(out_dir);
  const auto meta = nlohmann::json{{"seed", seed}, {"config_hash", ctx.config_hash}};
  nlohmann::json rj = agent::explore_result_to_json(result);
  rj["meta"] = meta;
  {
    std::ofstream out(fs::path(out_dir) / "result.json");
    if (!out) throw IoError("explore: cannot write result.json");
    out << rj.dump(2) << "\n";
  }
  topo::save_graph(result.graph, (fs::path(out_dir) / "graph.json").string(), meta);
  model::save_checkpoint(result.params, (fs::path(out_dir) / "model_finetuned.json").string(),
                         meta);
  data::save_dataset(result.online_data, (fs::path(out_dir) / "online_data.jsonl").string());
  {
    std::ofstream out(fs::path(out_dir) / "decisions.log");
    out << agent::decision_trace_lines(result);
  }
  write_manifest(
      make_manifest("explore", {world_path, ckpt_path},
                    {(fs::path(out_dir) / "result.json").string(),
                     (fs::path(out_dir) / "graph.json").string(),
                     (fs::path(out_dir) / "model_finetuned.json").string(),
                     (fs::path(out_dir) / "online_data.jsonl").string()},
                    seed, ctx.config_hash),
      (fs::path(out_dir) / "manifest.json").string());
  std::cout << (result.discovered ? "discovered goal" : "budget exhausted") << " after "
            << result.total_steps << " steps; graph " << result.graph.size() << " vertices -> "
            << out_dir << "\n";
}

void cmd_navigate(const Ctx& ctx, const std::string& world_path, const std::string& ckpt_path,
                  const std::string& graph_path, const std::string& goal_str,
                  const std::string& start_str, long nav_budget, std::uint64_t seed,
                  const std::string& out_dir) {
  const auto world = sim::load_world(world_path);
  const auto ckpt = model::load_checkpoint(ckpt_path);
  auto graph = topo::load_graph(graph_path);
  const sim::Point goal = parse_point(goal_str);
  const sim::Pose start = start_str.empty() ? default_start(world) : parse_pose(start_str);

  agent::ExploreConfig cfg;
  cfg.nav_step_budget = nav_budget;
  cfg.seed = seed;

  agent::SimSession session(world, start);
  const auto o_goal = sim::observe(world, {goal.x, goal.y, 0.0});
  const auto nav = agent::goal_navigate(session, ckpt, graph, o_goal, goal, cfg);

  std::cout << (nav.success ? "reached goal" : (nav.no_path ? "no path" : "failed")) << " in "
            << nav.steps << " steps (" << nav.replans << " replans)\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    nlohmann::json j = {{"success", nav.success}, {"steps", nav.steps},
                        {"no_path", nav.no_path}, {"replans", nav.replans},
                        {"meta", {{"seed", seed}, {"config_hash", ctx.config_hash}}}};
    const std::string path = (fs::path(out_dir) / "nav_result.json").string();
    std::ofstream out(path);
    if (!out) throw IoError("navigate: cannot write " + path);
    out << j.dump(2) << "\n";
    out.close();
    write_manifest(make_manifest("navigate", {world_path, ckpt_path, graph_path}, {path}, seed,
                                 ctx.config_hash),
                   (fs::path(out_dir) / "manifest.json").string());
  }
}

void cmd_graph_inspect(const std::string& path) {
  const auto g = topo::load_graph(path);
  std::vector<double> counts, weights;
  for (const auto& v : g.nodes()) counts.push_back(static_cast<double>(v.count));
  for (const auto& [k, w] : g.edges()) weights.push_back(w);
  auto minmax = [](const std::vector<double>& v) {
    if (v.empty()) return std::pair<double, double>{0, 0};
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return std::pair<double, double>{*lo, *hi};
  };
  const auto [cmin, cmax] = minmax(counts);
  const auto [wmin, wmax] = minmax(weights);
  std::cout << "vertices: " << g.size() << "\n"
            << "edges: " << g.edge_count() << "\n"
            << "counts: min " << cmin << " median " << eval::median(counts) << " max " << cmax
            << "\n"
            << "edge weights: min " << wmin << " median " << eval::median(weights) << " max "
            << wmax << "\n";
}

void cmd_experiment(const Ctx& ctx, const std::string& config_path) {
  const auto cfg = eval::load_experiment_config(config_path);
  const auto reports = eval::run_experiment(cfg);
  write_manifest(make_manifest("experiment", {config_path, cfg.ckpt_path},
                               {(fs::path(cfg.out_dir) / "aggregate.csv").string(),
                                (fs::path(cfg.out_dir) / "coverage_curves.csv").string()},
                               0, ctx.config_hash),
                 (fs::path(cfg.out_dir) / "manifest.json").string());
  for (const auto& row : eval::aggregate_reports(reports)) {
    std::cout << row.method << ": " << row.discovered << "/" << row.runs
              << " discovered, median expl " << row.median_exploration_steps
              << ", median nav " << row.median_navigation_steps << ", mean SCT " << row.mean_sct
              << "\n";
  }
  std::cout << "wrote " << reports.size() << " run files -> " << cfg.out_dir << "\n";
}

void cmd_report(const Ctx& ctx, const std::string& runs_dir, std::string out_dir) {
  const auto reports = eval::load_reports_dir(runs_dir);
  if (reports.empty()) throw IoError("report: no run_*.json files in " + runs_dir);
  if (out_dir.empty()) out_dir = runs_dir;
  fs::create_directories(out_dir);
  const std::string agg = (fs::path(out_dir) / "aggregate.csv").string();
  const std::string cov = (fs::path(out_dir) / "coverage_curves.csv").string();
  eval::write_aggregate_csv(eval::aggregate_reports(reports), agg);
  eval::write_coverage_csv(reports, cov);
  write_manifest(make_manifest("report", {}, {agg, cov}, 0, ctx.config_hash),
                 (fs::path(out_dir) / "report.manifest.json").string());
  std::cout << "aggregated " << reports.size() << " runs -> " << agg << "\n";
}

}  // namespace

int run(std::vector<std::string> args) {
  std::string joined;
  for (const auto& a : args) {
    joined += a;
    joined += '\x1f';
  }
  Ctx ctx{hash_hex(fnv1a64(joined))};

  CLI::App app{"Goal-directed exploration and navigation testbed: latent goal model, "
               "topological memory, 2D simulator"};
  app.name("recon");
  app.require_subcommand(0, 1);

  // make-world
  auto* mk = app.add_subcommand("make-world", "Generate or validate a world spec");
  std::uint64_t mk_seed = 0;
  std::string mk_spec, mk_out;
  double mk_w = 24.0, mk_h = 24.0;
  int mk_obstacles = 13;
  bool mk_no_anchors = false;
  auto* mk_seed_opt = mk->add_option("--seed", mk_seed, "Generator seed");
  mk->add_option("--spec", mk_spec, "Existing spec to validate and normalize");
  mk->add_option("--out", mk_out, "Output world JSON")->required();
  mk->add_option("--width", mk_w, "World width (m)");
  mk->add_option("--height", mk_h, "World height (m)");
  mk->add_option("--obstacles", mk_obstacles, "Obstacle count");
  mk->add_flag("--no-anchors", mk_no_anchors, "Skip corner keep-free anchors");
  mk->callback([&] {
    cmd_make_world(ctx, mk_seed, mk_seed_opt->count() > 0, mk_spec, mk_out, mk_w, mk_h,
                   mk_obstacles, mk_no_anchors);
  });

  // collect
  auto* co = app.add_subcommand("collect", "Random-walk data collection and relabeling");
  std::string co_world, co_start, co_out, co_traj;
  long co_steps = 1000;
  std::uint64_t co_seed = 0;
  int co_tmax = 30;
  co->add_option("--world", co_world, "World JSON")->required();
  co->add_option("--start", co_start, "Start pose 'x,y,theta'");
  co->add_option("--steps", co_steps, "Control steps to collect");
  co->add_option("--seed", co_seed, "Collection seed");
  co->add_option("--out", co_out, "Output dataset JSONL")->required();
  co->add_option("--traj-out", co_traj, "Optional trajectory archive JSONL");
  co->add_option("--tmax", co_tmax, "Relabeling window (steps)");
  co->callback(
      [&] { cmd_collect(ctx, co_world, co_start, co_steps, co_seed, co_out, co_traj, co_tmax); });

  // train
  auto* tr = app.add_subcommand("train", "Train the latent goal model");
  std::string tr_data, tr_out;
  int tr_epochs = 30, tr_latent = 16, tr_hidden = 64, tr_batch = 128;
  double tr_beta = 1.0, tr_lr = 1e-4;
  std::uint64_t tr_seed = 0;
  tr->add_option("--data", tr_data, "Dataset JSONL")->required();
  tr->add_option("--epochs", tr_epochs, "Training epochs");
  tr->add_option("--beta", tr_beta, "Bottleneck weight");
  tr->add_option("--seed", tr_seed, "Init/shuffle seed");
  tr->add_option("--out", tr_out, "Output checkpoint JSON")->required();
  tr->add_option("--latent-dim", tr_latent, "Latent dimension");
  tr->add_option("--hidden", tr_hidden, "Hidden layer width");
  tr->add_option("--lr", tr_lr, "Adam learning rate");
  tr->add_option("--batch", tr_batch, "Batch size");
  tr->callback([&] {
    cmd_train(ctx, tr_data, tr_epochs, tr_beta, tr_seed, tr_out, tr_latent, tr_hidden, tr_lr,
              tr_batch);
  });

  // explore
  auto* ex = app.add_subcommand("explore", "Goal-directed exploration of a world");
  std::string ex_world, ex_ckpt, ex_goal, ex_start, ex_out;
  long ex_budget = 1000;
  std::uint64_t ex_seed = 0;
  ex->add_option("--world", ex_world, "World JSON")->required();
  ex->add_option("--ckpt", ex_ckpt, "Model checkpoint")->required();
  ex->add_option("--goal-pose", ex_goal, "Goal point 'x,y'")->required();
  ex->add_option("--start-pose", ex_start, "Start pose 'x,y,theta'");
  ex->add_option("--budget", ex_budget, "Exploration step budget");
  ex->add_option("--seed", ex_seed, "Run seed");
  ex->add_option("--out", ex_out, "Output directory")->required();
  ex->callback([&] {
    cmd_explore(ctx, ex_world, ex_ckpt, ex_goal, ex_start, ex_budget, ex_seed, ex_out);
  });

  // navigate
  auto* na = app.add_subcommand("navigate", "Navigate an explored world via its graph");
  std::string na_world, na_ckpt, na_graph, na_goal, na_start, na_out;
  long na_budget = 400;
  std::uint64_t na_seed = 0;
  na->add_option("--world", na_world, "World JSON")->required();
  na->add_option("--ckpt", na_ckpt, "Model checkpoint")->required();
  na->add_option("--graph", na_graph, "Graph JSON from explore")->required();
  na->add_option("--goal-pose", na_goal, "Goal point 'x,y'")->required();
  na->add_option("--start-pose", na_start, "Start pose 'x,y,theta'");
  na->add_option("--nav-budget", na_budget, "Navigation step budget");
  na->add_option("--seed", na_seed, "Run seed");
  na->add_option("--out", na_out, "Optional output directory");
  na->callback([&] {
    cmd_navigate(ctx, na_world, na_ckpt, na_graph, na_goal, na_start, na_budget, na_seed, na_out);
  });

  // graph inspect
  auto* gr = app.add_subcommand("graph", "Graph utilities");
  auto* gi = gr->add_subcommand("inspect", "Print graph summary statistics");
  std::string gi_path;
  gi->add_option("path", gi_path, "Graph JSON")->required();
  gi->callback([&] { cmd_graph_inspect(gi_path); });
  gr->require_subcommand(1);

  // experiment
  auto* xp = app.add_subcommand("experiment", "Run a methods x worlds x seeds experiment");
  std::string xp_config;
  xp->add_option("--config", xp_config, "Experiment config JSON")->required();
  xp->callback([&] { cmd_experiment(ctx, xp_config); });

  // report
  auto* rp = app.add_subcommand("report", "Aggregate run files into tables and curves");
  std::string rp_runs, rp_out;
  rp->add_option("--runs", rp_runs, "Directory of run_*.json files")->required();
  rp->add_option("--out", rp_out, "Output directory (defaults to runs dir)");
  rp->callback([&] { cmd_report(ctx, rp_runs, rp_out); });

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (app.get_subcommands().empty()) {
    std::cout << app.help();
    return 2;
  }
  return 0;
}

}  // namespace recon::cli
