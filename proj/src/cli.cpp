#include "ratrial/cli.hpp"

#include <omp.h>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "ratrial/designs.hpp"
#include "ratrial/errors.hpp"
#include "ratrial/io.hpp"
#include "ratrial/oc_eval.hpp"

namespace ratrial {

namespace {

namespace fs = std::filesystem;

struct GlobalFlags {
  std::string config_path;
  std::string policy_path;
  std::string out_dir;
  std::string terminal_cache;
  std::string experiment_id;
  int threads = 0;
  double eps_tol = -1.0;  // <0: keep config value
  double phi = -1.0;
  bool seedless = false;  // accepted for interface compatibility; computation never uses RNG
};

void apply_thread_count(int config_threads, int flag_threads) {
  const int threads = flag_threads > 0 ? flag_threads : config_threads;
  if (threads > 0) omp_set_num_threads(threads);
}

TerminalTable obtain_terminal_table(int n, const std::string& cache_dir) {
  if (cache_dir.empty()) return build_terminal_table(n);
  fs::create_directories(cache_dir);
  const fs::path path = fs::path(cache_dir) / ("terminal-n" + std::to_string(n) + ".bin");
  if (fs::exists(path)) return load_terminal_table(path.string(), n);
  TerminalTable table = build_terminal_table(n);
  save_terminal_table(table, path.string());
  return table;
}

bool design_uses_test(DesignTag tag) {
  return tag == DesignTag::cmdp_t || tag == DesignTag::cmdp_e1 || tag == DesignTag::cmdp_e2;
}

std::string default_path(const std::string& out_dir, const std::string& stem,
                         const std::string& suffix) {
  if (out_dir.empty()) return {};
  fs::create_directories(out_dir);
  return (fs::path(out_dir) / (stem + suffix)).string();
}

void fill_default_outputs(RunConfig* config, const GlobalFlags& flags, const std::string& stem) {
  if (config->output.report.empty())
    config->output.report = default_path(flags.out_dir, stem, "-report.json");
  if (config->output.policy.empty())
    config->output.policy = default_path(flags.out_dir, stem, "-policy.bin");
  if (config->output.csv.empty()) config->output.csv = default_path(flags.out_dir, stem, "-oc.csv");
}

RunConfig load_config(const GlobalFlags& flags) {
  if (flags.config_path.empty()) throw ConfigError("missing --config");
  RunConfig config = parse_config_file(flags.config_path);
  if (flags.eps_tol > 0.0) config.solver.eps_tol = flags.eps_tol;
  if (flags.phi > 0.0) config.solver.phi = flags.phi;
  apply_thread_count(config.threads, flags.threads);
  return config;
}

int cmd_solve(const GlobalFlags& flags, bool require_sweep) {
  RunConfig config = load_config(flags);
  if (!config.design) throw ConfigError(flags.config_path + ": missing design section");
  if (require_sweep && !config.sweep)
    throw ConfigError(flags.config_path + ": missing sweep section");
  fill_default_outputs(&config, flags, to_string(config.design->tag));

  std::optional<TerminalTable> table;
  const bool needs_table = design_uses_test(config.design->tag) || config.sweep;
  if (needs_table) table = obtain_terminal_table(config.design->n, flags.terminal_cache);

  const DesignOutcome outcome =
      run_design(*config.design, config.solver, table ? &*table : nullptr);
  std::cout << report_to_json(outcome);
  if (!config.output.report.empty()) save_report(outcome, config.output.report);
  if (!config.output.policy.empty()) save_policy(outcome.policy, outcome.spec, config.output.policy);

  if (config.sweep && !config.output.csv.empty()) {
    const StateIndexer idx(config.design->n);
    const auto rows = sweep_oc(idx, outcome.policy, config.sweep->theta_c, config.sweep->theta_d,
                               config.sweep->alpha, *table);
    save_csv(rows, config.output.csv);
  }
  return 0;
}

int cmd_evaluate(const GlobalFlags& flags) {
  RunConfig config = load_config(flags);
  if (!config.sweep) throw ConfigError(flags.config_path + ": missing sweep section");
  if (flags.policy_path.empty()) throw ConfigError("missing --policy");
  const LoadedPolicy loaded = load_policy(flags.policy_path);
  if (config.design && config.design->n != loaded.policy.horizon())
    throw ConfigError("configured horizon does not match the policy file");
  fill_default_outputs(&config, flags, fs::path(flags.policy_path).stem().string());

  const int n = loaded.policy.horizon();
  const TerminalTable table = obtain_terminal_table(n, flags.terminal_cache);
  const StateIndexer idx(n);
  const auto rows = sweep_oc(idx, loaded.policy, config.sweep->theta_c, config.sweep->theta_d,
                             config.sweep->alpha, table);
  if (config.output.csv.empty()) {
    std::cout << oc_rows_to_csv(rows);
  } else {
    save_csv(rows, config.output.csv);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// reproduce: the published comparisons with their parameters hard-wired.

struct Experiment {
  std::vector<DesignSpec> designs;
  double theta_c = 0.5;
};

DesignSpec base_spec(DesignTag tag, int n) {
  DesignSpec spec;
  spec.tag = tag;
  spec.n = n;
  spec.alpha = 0.1;
  return spec;
}

DesignSpec cmdp_t_spec(int n, double p) {
  DesignSpec spec = base_spec(DesignTag::cmdp_t, n);
  spec.p = p;
  spec.alpha_star = n == 75 ? 0.05 : 0.07;
  spec.beta = n == 75 ? 0.4 : 0.23;
  return spec;
}

DesignSpec cmdp_e1_spec(int n, double p) {
  DesignSpec spec = base_spec(DesignTag::cmdp_e1, n);
  spec.p = p;
  spec.alpha_star = 1.0;
  spec.beta = 1.0;
  spec.xi = n == 75 ? 1.05 : 1.1;
  return spec;
}

DesignSpec cmdp_e2_spec(int n, double p) {
  DesignSpec spec = base_spec(DesignTag::cmdp_e2, n);
  spec.p = p;
  spec.alpha_star = n == 75 ? 0.05 : 0.07;
  spec.beta = n == 75 ? 0.4 : 0.753;
  spec.xi = n == 75 ? 1.0 : 1.05;
  return spec;
}

DesignSpec cmdp_r_spec(int n, double xi, bool strong_prior) {
  DesignSpec spec = base_spec(DesignTag::cmdp_r, n);
  spec.p = 0.95;
  spec.prior = strong_prior ? IndependentBeta{30, 70, 60, 40} : IndependentBeta{3, 7, 6, 4};
  spec.xi = xi;
  return spec;
}

std::map<std::string, Experiment> experiment_catalog() {
  std::map<std::string, Experiment> catalog;
  for (int n : {75, 200}) {
    const std::string suffix = "-n" + std::to_string(n);
    for (const auto& [variant, p, theta_c] :
         {std::tuple<std::string, double, double>{"", 0.95, 0.5},
          {"-p100", 1.0, 0.5},
          {"-tc25", 0.95, 0.25},
          {"-tc75", 0.95, 0.75}}) {
      Experiment app1;
      app1.theta_c = theta_c;
      app1.designs = {base_spec(DesignTag::er, n), base_spec(DesignTag::dp, n),
                      base_spec(DesignTag::crdp, n), cmdp_t_spec(n, p)};
      if (variant == "-tc25" || variant == "-tc75") app1.designs.push_back(cmdp_t_spec(n, 1.0));
      catalog["app1" + suffix + variant] = app1;

      Experiment app2;
      app2.theta_c = theta_c;
      app2.designs = {base_spec(DesignTag::er, n), base_spec(DesignTag::crdp, n),
                      cmdp_e1_spec(n, p), cmdp_e2_spec(n, p)};
      if (variant == "-tc25" || variant == "-tc75") {
        app2.designs.push_back(cmdp_e1_spec(n, 1.0));
        app2.designs.push_back(cmdp_e2_spec(n, 1.0));
      }
      catalog["app2" + suffix + variant] = app2;
    }
  }
  Experiment ess10;
  ess10.theta_c = 0.3;
  for (double xi : {0.0, 0.990, 0.999, 1.0}) ess10.designs.push_back(cmdp_r_spec(200, xi, false));
  catalog["app3-ess10"] = ess10;
  Experiment ess100;
  ess100.theta_c = 0.3;
  for (double xi : {0.0, 0.900, 0.990, 1.0}) ess100.designs.push_back(cmdp_r_spec(200, xi, true));
  catalog["app3-ess100"] = ess100;
  return catalog;
}

std::string design_stem(const DesignSpec& spec, int repeat) {
  std::string stem = to_string(spec.tag);
  if (spec.tag == DesignTag::cmdp_r) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "-xi%.3f", spec.xi);
    stem += buf;
  } else if (spec.tag == DesignTag::cmdp_t || spec.tag == DesignTag::cmdp_e1 ||
             spec.tag == DesignTag::cmdp_e2) {
    if (spec.p == 1.0) stem += "-p100";
  }
  if (repeat > 0) stem += "-" + std::to_string(repeat);
  return stem;
}

int cmd_reproduce(const GlobalFlags& flags) {
  const auto catalog = experiment_catalog();
  const auto it = catalog.find(flags.experiment_id);
  if (it == catalog.end()) {
    std::string known;
    for (const auto& [key, value] : catalog) known += " " + key;
    throw ConfigError("unknown experiment id '" + flags.experiment_id + "'; known:" + known);
  }
  if (flags.out_dir.empty()) throw ConfigError("reproduce requires --out");
  apply_thread_count(0, flags.threads);
  fs::create_directories(flags.out_dir);

  const Experiment& experiment = it->second;
  SolverOptions options;
  if (flags.eps_tol > 0.0) options.eps_tol = flags.eps_tol;
  if (flags.phi > 0.0) options.phi = flags.phi;

  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);

  std::map<std::string, int> seen;
  for (const DesignSpec& spec : experiment.designs) {
    const TerminalTable table = obtain_terminal_table(spec.n, flags.terminal_cache);
    const std::string stem =
        flags.experiment_id + "-" + design_stem(spec, seen[to_string(spec.tag)]++);
    std::cerr << "[reproduce] " << stem << "\n";
    const DesignOutcome outcome = run_design(spec, options, &table);
    save_report(outcome, default_path(flags.out_dir, stem, "-report.json"));
    save_policy(outcome.policy, outcome.spec, default_path(flags.out_dir, stem, "-policy.bin"));
    const StateIndexer idx(spec.n);
    const auto rows = sweep_oc(idx, outcome.policy, experiment.theta_c, grid, 0.1, table);
    save_csv(rows, default_path(flags.out_dir, stem, "-oc.csv"));
    std::cout << stem << ": value " << outcome.value << ", achieved "
              << outcome.achieved_objective << "\n";
  }
  return 0;
}

int cmd_selftest() {
  int failures = 0;
  const auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  StateIndexer idx(6);
  bool bijection = true;
  for (std::size_t g = 0; g < idx.num_states(); ++g)
    if (idx.index(idx.unindex(g)) != g) bijection = false;
  check("state index bijection (n=6)", bijection);

  const Measure uniform = IndependentBeta{1, 1, 1, 1};
  bool consistent = true;
  for (std::size_t g = 0; g < StateIndexer(4).num_nonterminal(); ++g) {
    const TrialState x = StateIndexer(4).unindex(g);
    for (Arm arm : {Arm::control, Arm::developmental}) {
      const double q = std::exp(log_marginal_likelihood(uniform, x));
      const double qs = std::exp(log_marginal_likelihood(uniform, successor(x, arm, Outcome::success)));
      if (std::fabs(predictive_success_prob(uniform, x, arm) - qs / q) > 1e-12) consistent = false;
    }
  }
  check("predictive kernel consistency (n=4)", consistent);

  const TerminalTable table = build_terminal_table(8, Exec::serial);
  bool pval_ok = true;
  for (double v : table.pvalues)
    if (!(v > 0.0 && v <= 1.0 + 1e-12)) pval_ok = false;
  check("exact test p-values in (0, 1] (n=8)", pval_ok);

  const BackwardResult dp = dp_policy(2, IndependentBeta{1, 1, 1, 1}, Exec::serial);
  check("two-step value 13/12", std::fabs(dp.value - 13.0 / 12.0) < 1e-12);

  LinearProgram lp;
  lp.num_vars = 1;
  lp.objective = {-1.0};
  lp.ineq_a = {{1.0}};
  lp.ineq_b = {1.0};
  const LpSolution sol = solve(lp);
  check("lp: max x s.t. x <= 1", sol.status == LpStatus::optimal && std::fabs(sol.x[0] - 1.0) < 1e-9);

  CmdpProblem vacuous;
  vacuous.horizon = 2;
  vacuous.p = 1.0;
  vacuous.objective_measure = IndependentBeta{1, 1, 1, 1};
  ConstraintSpec c;
  c.measure = IndependentBeta{1, 1, 1, 1};
  c.running_mean_coeff = 1.0;
  c.bound = 2.0;
  vacuous.constraints.push_back(c);
  SolverOptions options;
  options.exec = Exec::serial;
  const SolveReport report = solve(prepare(std::move(vacuous), Exec::serial), options);
  check("vacuous constraint solve reaches 13/12",
        std::fabs(report.achieved_objective - 13.0 / 12.0) < 1e-9);

  return failures == 0 ? 0 : 4;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Exact constrained-MDP design and evaluation for two-arm binary trials"};
  app.require_subcommand(1);
  GlobalFlags flags;

  const auto add_common = [&](CLI::App* cmd, bool with_config) {
    if (with_config) cmd->add_option("--config", flags.config_path, "JSON run configuration");
    cmd->add_option("--threads", flags.threads, "OpenMP thread count (0: default)");
    cmd->add_option("--eps-tol", flags.eps_tol, "cutting-plane tolerance override");
    cmd->add_option("--phi", flags.phi, "repair growth factor override");
    cmd->add_option("--out", flags.out_dir, "output directory for default file names");
    cmd->add_option("--terminal-cache", flags.terminal_cache,
                    "directory for cached terminal statistic tables");
    cmd->add_flag("--seedless", flags.seedless,
                  "assert seed-free operation (always true; no RNG anywhere)");
  };

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve a design and write report + policy");
  add_common(solve_cmd, true);
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "evaluate a saved policy over a parameter sweep");
  add_common(evaluate_cmd, true);
  evaluate_cmd->add_option("--policy", flags.policy_path, "policy artifact to evaluate");
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "solve a design and sweep its operating characteristics");
  add_common(sweep_cmd, true);
  CLI::App* reproduce_cmd =
      app.add_subcommand("reproduce", "rerun a published comparison end to end");
  add_common(reproduce_cmd, false);
  reproduce_cmd->add_option("--id", flags.experiment_id, "experiment identifier")->required();
  CLI::App* selftest_cmd = app.add_subcommand("selftest", "run quick internal consistency checks");
  add_common(selftest_cmd, false);

  try {
    std::vector<const char*> argv;
    argv.push_back("ratrial");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());

    if (app.got_subcommand(solve_cmd)) return cmd_solve(flags, false);
    if (app.got_subcommand(evaluate_cmd)) return cmd_evaluate(flags);
    if (app.got_subcommand(sweep_cmd)) return cmd_solve(flags, true);
    if (app.got_subcommand(reproduce_cmd)) return cmd_reproduce(flags);
    if (app.got_subcommand(selftest_cmd)) return cmd_selftest();
    return 2;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace ratrial
