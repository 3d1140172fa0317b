#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "checks.hpp"
#include "mvmc/config.hpp"
#include "mvmc/dp.hpp"
#include "mvmc/errors.hpp"
#include "mvmc/hjb.hpp"
#include "mvmc/io.hpp"
#include "mvmc/parallel.hpp"

namespace fs = std::filesystem;
using namespace mvmc;

namespace {

// Exit taxonomy: 0 ok, 2 config error, 3 numeric failure, 4 nonconvergence,
// 5 invariant failure, 6 artifact mismatch.
enum ExitCode {
  kOk = 0,
  kConfig = 2,
  kNumeric = 3,
  kNonconvergence = 4,
  kInvariant = 5,
  kArtifact = 6,
};

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> level;
  int workers = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config JSON")->required();
  cmd->add_option("--out", args.out_dir, "output directory (default: config output_dir)");
  cmd->add_option("--seed", args.seed, "override simulation seed");
  cmd->add_option("--level", args.level, "override dyadic level n");
  cmd->add_option("--workers", args.workers, "worker threads (no effect on results)");
}

struct Experiment {
  ExperimentConfig cfg;
  OutputStamp stamp;
  fs::path out;
  SimulationParams sim;
  SolverParams solver;
};

Experiment open_experiment(const CommonArgs& args) {
  Experiment e{ExperimentConfig::load(args.config_path), {}, {}, {}, {}};
  e.stamp.config_hash = e.cfg.config_hash();
  e.out = args.out_dir.empty() ? fs::path(e.cfg.output_dir()) : fs::path(args.out_dir);
  e.sim = e.cfg.simulation();
  e.solver = e.cfg.solver();
  if (args.seed) e.sim.seed = *args.seed;
  if (args.level) {
    e.solver.level = *args.level;
    if (e.solver.level < 0) throw ConfigError("--level must be >= 0");
  }
  fs::create_directories(e.out);
  return e;
}

ControlSchedule open_loop_schedule(const Experiment& e, const ActionGrid& actions) {
  const double delta = std::ldexp(1.0, -e.solver.level);
  const int segments = static_cast<int>(std::llround(e.sim.horizon / delta));
  ControlSchedule schedule;
  if (!e.sim.open_loop.empty()) {
    schedule = ControlSchedule::constant(e.solver.level, 0, segments);
    schedule.open_loop = e.sim.open_loop;
  } else {
    if (e.sim.action_index < 0 || e.sim.action_index >= static_cast<int>(actions.size()))
      throw ConfigError("simulation.action_index out of range");
    schedule = ControlSchedule::constant(e.solver.level, e.sim.action_index, segments);
  }
  return schedule;
}

int cmd_simulate(const CommonArgs& args) {
  Experiment e = open_experiment(args);
  const AtomicMeasure mu0 = e.cfg.prior();
  const ActionGrid actions = e.cfg.action_grid();
  const CostModel cm = e.cfg.cost_model();
  const ControlSchedule schedule = open_loop_schedule(e, actions);
  const bool weak = e.sim.mode == "weak";

  for (int p = 0; p < std::min(e.sim.save_paths, e.sim.paths); ++p) {
    RngStream rng(e.sim.seed, static_cast<std::uint64_t>(p));
    const PathSample path =
        weak ? simulate_weak_path(mu0, schedule, actions, e.sim.horizon, e.sim.dt, rng)
             : simulate_closed_loop(mu0, schedule, actions, e.sim.horizon, e.sim.dt, rng);
    write_path_csv(e.out / ("path_" + std::to_string(p) + ".csv"), path, e.stamp);
    write_json_file(e.out / ("path_" + std::to_string(p) + ".json"), path_to_json(path), e.stamp);
  }

  EstimateResult est;
  if (weak) {
    VectorXd costs(e.sim.paths);
    parallel_for(e.sim.paths, args.workers, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t p = lo; p < hi; ++p) {
        RngStream rng(e.sim.seed, static_cast<std::uint64_t>(p));
        const PathSample path =
            simulate_weak_path(mu0, schedule, actions, e.sim.horizon, e.sim.dt, rng);
        costs[p] = discounted_cost(path, cm, e.sim.horizon);
      }
    });
    est.paths = e.sim.paths;
    est.horizon = e.sim.horizon;
    est.truncation_bound = truncation_error(cm, e.sim.horizon);
    est.mean = pairwise_sum(costs) / e.sim.paths;
    VectorXd sq = (costs.array() - est.mean).square();
    est.stderr_ =
        std::sqrt(pairwise_sum(sq) / (static_cast<double>(e.sim.paths) * (e.sim.paths - 1)));
  } else {
    est = estimate_J(schedule, mu0, cm, actions, e.sim.paths, e.sim.horizon, e.sim.dt, e.sim.seed,
                     args.workers);
  }

  json summary;
  summary["mean"] = est.mean;
  summary["stderr"] = est.stderr_;
  summary["truncation_bound"] = est.truncation_bound;
  summary["M"] = est.paths;
  summary["T"] = est.horizon;
  summary["seed"] = e.sim.seed;
  summary["mode"] = e.sim.mode;
  write_json_file(e.out / "summary.json", summary, e.stamp);
  std::cout << "simulate: mean=" << est.mean << " stderr=" << est.stderr_ << " paths=" << est.paths
            << "\n";
  return kOk;
}

int cmd_solve(const CommonArgs& args) {
  Experiment e = open_experiment(args);
  const AtomicMeasure mu0 = e.cfg.prior();
  const ActionGrid actions = e.cfg.action_grid();
  const CostModel cm = e.cfg.cost_model();
  auto grid = std::make_shared<SimplexGrid>(
      make_simplex_grid(mu0.atoms_ptr(), e.solver.resolution, e.solver.node_cap));
  const double delta = std::ldexp(1.0, -e.solver.level);

  ValueFunction V = value_iteration(grid, delta, actions, cm, e.solver.quad, e.solver.substeps,
                                    e.solver.tol, e.solver.max_sweeps, args.workers);
  const ControlSchedule policy =
      extract_policy(V, delta, actions, cm, e.solver.quad, e.solver.substeps, args.workers);
  V.policy = policy.feedback;

  write_value_function_csv(e.out / "value.csv", V, e.stamp);
  write_policy_csv(e.out / "policy.csv", V, actions, e.stamp);
  json meta = value_metadata_json(V, actions, cm.beta);
  meta["value_at_mu0"] = interpolate(V, mu0);
  write_json_file(e.out / "value_metadata.json", meta, e.stamp);

  const HjbResidualReport residual = hjb_residual_diagnostic(V, actions, cm);
  write_json_file(e.out / "hjb_residual.json", hjb_residual_to_json(residual), e.stamp);
  write_hjb_residual_csv(e.out / "hjb_residual.csv", *V.grid, residual, e.stamp);
  std::cout << "solve: level=" << V.level << " nodes=" << grid->node_count()
            << " sweeps=" << V.sweeps << " V(mu0)=" << interpolate(V, mu0) << "\n";
  return kOk;
}

int cmd_convergence(const CommonArgs& args) {
  Experiment e = open_experiment(args);
  const AtomicMeasure mu0 = e.cfg.prior();
  const ActionGrid actions = e.cfg.action_grid();
  const CostModel cm = e.cfg.cost_model();
  auto grid = std::make_shared<SimplexGrid>(
      make_simplex_grid(mu0.atoms_ptr(), e.solver.resolution, e.solver.node_cap));
  std::vector<int> levels = e.solver.level_list;
  if (levels.empty()) throw ConfigError("convergence: config solver.n_list is required");

  const auto rows = refine_study(mu0, cm, actions, levels, grid, e.solver.quad, e.solver.substeps,
                                 e.solver.tol, e.solver.max_sweeps, args.workers);
  write_refine_csv(e.out / "refinement.csv", rows, e.stamp);
  json table = json::array();
  for (const auto& r : rows) {
    table.push_back({{"level", r.level},
                     {"delta", r.delta},
                     {"value_at_mu0", r.value_at_mu0},
                     {"sweeps", r.sweeps},
                     {"residual", r.residual}});
  }
  write_json_file(e.out / "refinement.json", json{{"rows", table}}, e.stamp);
  for (const auto& r : rows)
    std::cout << "convergence: n=" << r.level << " V(mu0)=" << r.value_at_mu0 << "\n";
  return kOk;
}

int cmd_evaluate(const CommonArgs& args, const std::string& value_csv,
                 const std::string& value_meta) {
  Experiment e = open_experiment(args);
  const AtomicMeasure mu0 = e.cfg.prior();
  const CostModel cm = e.cfg.cost_model();

  const fs::path csv = value_csv.empty() ? e.out / "value.csv" : fs::path(value_csv);
  const fs::path meta = value_meta.empty() ? e.out / "value_metadata.json" : fs::path(value_meta);
  LoadedValueArtifact artifact = read_value_artifact(csv, meta);

  if (artifact.V.grid->atoms().size() != mu0.size() ||
      (artifact.V.grid->atoms() - mu0.atoms()).cwiseAbs().maxCoeff() > 0.0)
    throw ArtifactMismatchError("evaluate: artifact atom set differs from the config prior");
  for (int a : artifact.V.policy)
    if (a < 0) throw ArtifactMismatchError("evaluate: artifact has no stored policy");

  ControlSchedule policy;
  policy.level = artifact.V.level;
  policy.mode = ControlSchedule::Mode::kFeedback;
  policy.grid = artifact.V.grid;
  policy.feedback = artifact.V.policy;

  const EstimateResult est = estimate_J(policy, mu0, cm, artifact.actions, e.sim.paths,
                                        e.sim.horizon, e.sim.dt, e.sim.seed, args.workers);
  const double v_mu0 = interpolate(artifact.V, mu0);
  const EpsilonBudget budget = make_epsilon_budget(artifact.V, est.stderr_, est.truncation_bound);
  const bool pass = est.mean <= v_mu0 + budget.total() && est.mean >= v_mu0 - budget.total();

  json report;
  report["J_mean"] = est.mean;
  report["J_stderr"] = est.stderr_;
  report["V_at_mu0"] = v_mu0;
  report["epsilon_budget"] = {{"iteration_tol", budget.iteration_tol},
                              {"interpolation", budget.interpolation},
                              {"mc_4stderr", budget.mc},
                              {"truncation", budget.truncation},
                              {"total", budget.total()}};
  report["paths"] = est.paths;
  report["horizon"] = est.horizon;
  report["seed"] = e.sim.seed;
  report["pass"] = pass;
  write_json_file(e.out / "evaluate.json", report, e.stamp);
  std::cout << "evaluate: J=" << est.mean << " +- " << est.stderr_ << " V(mu0)=" << v_mu0
            << " budget=" << budget.total() << " pass=" << (pass ? "yes" : "no") << "\n";
  return pass ? kOk : kInvariant;
}

int cmd_check(const CommonArgs& args) {
  Experiment e = open_experiment(args);
  const auto results = run_invariant_checks(e.cfg, args.workers);
  json report = json::array();
  int failures = 0;
  for (const auto& r : results) {
    report.push_back({{"name", r.name},
                      {"status", r.pass ? "pass" : "fail"},
                      {"statistic", r.statistic},
                      {"threshold", r.threshold},
                      {"note", r.note}});
    if (!r.pass) ++failures;
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " (statistic=" << r.statistic
              << ", threshold=" << r.threshold << ")\n";
  }
  write_json_file(e.out / "invariants.json", json{{"invariants", report}, {"failures", failures}},
                  e.stamp);
  if (failures > 0) {
    std::cout << failures << " invariant(s) failed\n";
    return kInvariant;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvmc: filter simulation, dynamic programming and diagnostics for Bayesian "
               "adaptive control of a hidden static signal"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string value_csv, value_meta;

  CLI::App* simulate = app.add_subcommand("simulate", "simulate filter paths and estimate the objective");
  add_common(simulate, args);
  CLI::App* solve = app.add_subcommand("solve", "value iteration and policy extraction");
  add_common(solve, args);
  CLI::App* evaluate = app.add_subcommand("evaluate", "closed-loop evaluation of a solved policy");
  add_common(evaluate, args);
  evaluate->add_option("--value", value_csv, "value table CSV (default <out>/value.csv)");
  evaluate->add_option("--value-meta", value_meta,
                       "value metadata JSON (default <out>/value_metadata.json)");
  CLI::App* check = app.add_subcommand("check", "run the invariant battery");
  add_common(check, args);
  CLI::App* convergence = app.add_subcommand("convergence", "dyadic refinement study");
  add_common(convergence, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(args);
    if (solve->parsed()) return cmd_solve(args);
    if (evaluate->parsed()) return cmd_evaluate(args, value_csv, value_meta);
    if (check->parsed()) return cmd_check(args);
    if (convergence->parsed()) return cmd_convergence(args);
  } catch (const ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kConfig;
  } catch (const ConvergenceError& ex) {
    std::cerr << "nonconvergence: " << ex.what() << " (last residual " << ex.last_residual
              << ")\n";
    return kNonconvergence;
  } catch (const ArtifactMismatchError& ex) {
    std::cerr << "artifact mismatch: " << ex.what() << "\n";
    return kArtifact;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kConfig;
  } catch (const std::domain_error& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kConfig;
  } catch (const std::exception& ex) {
    std::cerr << "numeric failure: " << ex.what() << "\n";
    return kNumeric;
  }
  return kOk;
}
