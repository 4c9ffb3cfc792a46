#include "ratrial/cmdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace ratrial {

namespace {

constexpr double kSlackTol = 1e-9;
constexpr double kRepairSeed = 1e-6;

std::vector<double> reweight_array(const std::vector<double>& raw, const ReweightTables& w,
                                   int stage, Exec exec) {
  std::vector<double> out(raw.size());
  const auto block = [&](int n_c) {
    const int n_d = stage - n_c;
    std::size_t i = StateIndexer::block_offset(stage, n_c);
    for (int s_c = 0; s_c <= n_c; ++s_c)
      for (int s_d = 0; s_d <= n_d; ++s_d, ++i) {
        const StateRef ref{n_c, s_c, n_d, s_d, tri_index(n_c, s_c), tri_index(n_d, s_d),
                           tri_index(stage, s_c + s_d)};
        out[i] = raw[i] * w.weight(ref);
      }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int n_c = 0; n_c <= stage; ++n_c) block(n_c);
  } else {
    for (int n_c = 0; n_c <= stage; ++n_c) block(n_c);
  }
  return out;
}

// Reweights a dense per-nonterminal-state array stage by stage.
std::vector<double> reweight_dense(const std::vector<double>& raw, const ReweightTables& w,
                                   const StateIndexer& idx) {
  std::vector<double> out(raw.size());
  for (int t = 0; t < idx.horizon(); ++t) {
    const std::size_t offset = idx.stage_offset(t);
    const int stage = t;
    for (int n_c = 0; n_c <= stage; ++n_c) {
      const int n_d = stage - n_c;
      std::size_t i = StateIndexer::block_offset(stage, n_c);
      for (int s_c = 0; s_c <= n_c; ++s_c)
        for (int s_d = 0; s_d <= n_d; ++s_d, ++i) {
          const StateRef ref{n_c, s_c, n_d, s_d, tri_index(n_c, s_c), tri_index(n_d, s_d),
                             tri_index(stage, s_c + s_d)};
          out[offset + i] = raw[offset + i] * w.weight(ref);
        }
    }
  }
  return out;
}

double stage_reward_value(const RewardSpec& spec, const StateIndexer& idx, const TrialState& x,
                          double delta) {
  const StateRef ref = make_ref(x);
  double rho_c = 0.0, rho_d = 0.0, kap = 0.0;
  if (!spec.rho_c_dense.empty() || !spec.rho_d_dense.empty() || !spec.kappa.empty()) {
    const std::size_t g = idx.index(x);
    if (!spec.rho_c_dense.empty()) rho_c += spec.rho_c_dense[g];
    if (!spec.rho_d_dense.empty()) rho_d += spec.rho_d_dense[g];
    if (!spec.kappa.empty()) kap = spec.kappa[g];
  }
  for (const auto& term : spec.mean_terms) {
    const double w = term.weight ? term.coeff * term.weight->weight(ref) : term.coeff;
    rho_c += w * term.means->success_c(ref);
    rho_d += w * term.means->success_d(ref);
  }
  return delta * rho_c + (1.0 - delta) * rho_d + kap;
}

}  // namespace

CmdpContext prepare(CmdpProblem problem, Exec exec) {
  if (problem.horizon < 1) throw std::invalid_argument("prepare: horizon must be at least 1");
  if (problem.p < 0.5 || problem.p > 1.0)
    throw std::invalid_argument("prepare: randomization degree outside [1/2, 1]");
  if (!std::holds_alternative<IndependentBeta>(problem.objective_measure))
    throw std::invalid_argument(
        "prepare: objective measure must be an independent Beta law (q > 0 everywhere)");
  validate(problem.objective_measure);

  CmdpContext ctx{std::move(problem), StateIndexer(0), nullptr, nullptr, {}, {}};
  ctx.idx = StateIndexer(ctx.problem.horizon);
  const int n = ctx.problem.horizon;
  const std::size_t terminal_count = stage_size(n);
  if (!ctx.problem.objective_terminal.empty() &&
      ctx.problem.objective_terminal.size() != terminal_count)
    throw std::invalid_argument("prepare: objective terminal reward has wrong length");

  ctx.kernel = std::make_shared<PredictiveTables>(ctx.problem.objective_measure, n);
  ctx.objective_logq = std::make_shared<LogMarginalTables>(ctx.problem.objective_measure, n);
  if (ctx.problem.objective_mean_coeff != 0.0)
    ctx.objective.mean_terms.push_back({ctx.problem.objective_mean_coeff, ctx.kernel, nullptr});
  ctx.objective.terminal = ctx.problem.objective_terminal;

  for (const ConstraintSpec& spec : ctx.problem.constraints) {
    validate(spec.measure);
    CmdpContext::PreparedConstraint pc;
    pc.bound = spec.bound;
    pc.label = spec.label;
    pc.logq = std::make_shared<LogMarginalTables>(spec.measure, n);
    pc.weight = std::make_shared<ReweightTables>(*pc.logq, *ctx.objective_logq);
    if (spec.running_mean_coeff != 0.0) {
      pc.means = std::make_shared<PredictiveTables>(spec.measure, n);
      pc.reweighted.mean_terms.push_back({spec.running_mean_coeff, pc.means, pc.weight});
    }
    const std::size_t nt = ctx.idx.num_nonterminal();
    if (!spec.rho_c_dense.empty() || !spec.rho_d_dense.empty() || !spec.kappa.empty()) {
      if ((!spec.rho_c_dense.empty() && spec.rho_c_dense.size() != nt) ||
          (!spec.rho_d_dense.empty() && spec.rho_d_dense.size() != nt) ||
          (!spec.kappa.empty() && spec.kappa.size() != nt))
        throw std::invalid_argument("prepare: dense constraint reward has wrong length");
      if (!spec.rho_c_dense.empty())
        pc.reweighted.rho_c_dense = reweight_dense(spec.rho_c_dense, *pc.weight, ctx.idx);
      if (!spec.rho_d_dense.empty())
        pc.reweighted.rho_d_dense = reweight_dense(spec.rho_d_dense, *pc.weight, ctx.idx);
      if (!spec.kappa.empty()) pc.reweighted.kappa = reweight_dense(spec.kappa, *pc.weight, ctx.idx);
    }
    if (!spec.terminal.empty()) {
      if (spec.terminal.size() != terminal_count)
        throw std::invalid_argument("prepare: constraint terminal reward has wrong length");
      pc.reweighted.terminal = reweight_array(spec.terminal, *pc.weight, n, exec);
    }
    ctx.constraints.push_back(std::move(pc));
  }
  return ctx;
}

RewardSpec reweight_constraint(const CmdpContext& ctx, std::size_t c) {
  return ctx.constraints.at(c).reweighted;
}

namespace {

// Objective minus the lambda-weighted reweighted constraint rewards.
RewardSpec combine_rewards(const CmdpContext& ctx, const std::vector<double>& lambda) {
  RewardSpec combined;
  combined.mean_terms = ctx.objective.mean_terms;
  combined.rho_c_dense = ctx.objective.rho_c_dense;
  combined.rho_d_dense = ctx.objective.rho_d_dense;
  combined.kappa = ctx.objective.kappa;
  combined.terminal = ctx.objective.terminal;

  const std::size_t nt = ctx.idx.num_nonterminal();
  const std::size_t term_count = stage_size(ctx.idx.horizon());
  const auto axpy = [](std::vector<double>& acc, const std::vector<double>& v, double a,
                       std::size_t len) {
    if (v.empty() || a == 0.0) return;
    if (acc.empty()) acc.assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) acc[i] += a * v[i];
  };
  for (std::size_t c = 0; c < ctx.constraints.size(); ++c) {
    const double lam = lambda[c];
    if (lam == 0.0) continue;
    const RewardSpec& rw = ctx.constraints[c].reweighted;
    for (const auto& term : rw.mean_terms)
      combined.mean_terms.push_back({-lam * term.coeff, term.means, term.weight});
    axpy(combined.rho_c_dense, rw.rho_c_dense, -lam, nt);
    axpy(combined.rho_d_dense, rw.rho_d_dense, -lam, nt);
    axpy(combined.kappa, rw.kappa, -lam, nt);
    axpy(combined.terminal, rw.terminal, -lam, term_count);
  }
  return combined;
}

}  // namespace

LagrangianResult lagrangian(const CmdpContext& ctx, const std::vector<double>& lambda, Exec exec,
                            bool want_policy) {
  if (lambda.size() != ctx.constraints.size())
    throw std::invalid_argument("lagrangian: multiplier count mismatch");
  for (double l : lambda)
    if (l < 0.0) throw std::invalid_argument("lagrangian: negative multiplier");
  const RewardSpec combined = combine_rewards(ctx, lambda);
  BackwardResult backward =
      backward_induction(ctx.idx, *ctx.kernel, combined, ctx.problem.p, exec, want_policy);
  LagrangianResult result;
  result.dp_value = backward.value;
  result.value = backward.value;
  for (std::size_t c = 0; c < lambda.size(); ++c)
    result.value += lambda[c] * ctx.constraints[c].bound;
  result.policy = std::move(backward.policy);
  return result;
}

PolicyEvaluation evaluate_policy(const CmdpContext& ctx, const PolicyTable& policy, Exec exec,
                                 bool check_support) {
  std::vector<const RewardSpec*> specs;
  specs.reserve(ctx.constraints.size() + 1);
  for (const auto& pc : ctx.constraints) specs.push_back(&pc.reweighted);
  specs.push_back(&ctx.objective);
  ForwardOptions options;
  options.check_support = check_support;
  auto eval = forward_evaluate(ctx.idx, *ctx.kernel, policy, specs, options, exec);
  PolicyEvaluation out;
  out.objective_total = eval.totals.back();
  eval.totals.pop_back();
  out.constraint_totals = std::move(eval.totals);
  out.randomized_on_support = eval.randomized_on_support;
  return out;
}

std::vector<double> subgradient(const CmdpContext& ctx, const PolicyTable& greedy, Exec exec) {
  const PolicyEvaluation eval = evaluate_policy(ctx, greedy, exec, false);
  std::vector<double> g(ctx.constraints.size());
  for (std::size_t c = 0; c < g.size(); ++c) g[c] = ctx.constraints[c].bound - eval.constraint_totals[c];
  return g;
}

CutPlaneResult cutting_plane(const CmdpContext& ctx, const SolverOptions& options) {
  if (options.eps_tol <= 0.0) throw std::invalid_argument("cutting_plane: eps_tol must be positive");
  const std::size_t m = ctx.num_constraints();
  LinearProgram master;
  master.num_vars = m + 1;
  master.objective.assign(m + 1, 0.0);
  master.objective[0] = 1.0;
  master.ineq_a.emplace_back(m + 1, 0.0);  // initial all-zero cut
  master.ineq_b.push_back(0.0);
  for (std::size_t c = 0; c < m; ++c) {  // multiplier safety box
    std::vector<double> row(m + 1, 0.0);
    row[c + 1] = 1.0;
    master.ineq_a.push_back(std::move(row));
    master.ineq_b.push_back(options.lambda_box);
  }

  CutPlaneResult result;
  result.dual_value = std::numeric_limits<double>::infinity();
  std::vector<double> lambda(m, 0.0);

  for (int iter = 1; iter <= options.max_cut_iterations; ++iter) {
    const LpSolution sol = ::ratrial::solve(master);
    if (sol.status != LpStatus::optimal)
      throw NumericError("cutting_plane: master problem not optimal");
    result.lower_bound = sol.x[0];
    std::copy(sol.x.begin() + 1, sol.x.end(), lambda.begin());

    const LagrangianResult lag = lagrangian(ctx, lambda, options.exec, m > 0);
    result.dual_value = std::min(result.dual_value, lag.value);
    result.iterations = iter;
    result.lambda = lambda;

    if (lag.value <= 0.0) {
      result.status = CutStatus::infeasible;
      result.dual_value = -std::numeric_limits<double>::infinity();
      return result;
    }
    if (result.dual_value - result.lower_bound <= options.eps_tol) {
      result.status = CutStatus::converged;
      for (std::size_t c = 0; c < m; ++c)
        if (lambda[c] >= options.lambda_box * (1.0 - 1e-9)) result.box_active = true;
      return result;
    }
    std::vector<double> g =
        m > 0 ? subgradient(ctx, lag.policy, options.exec) : std::vector<double>{};
    std::vector<double> row(m + 1, 0.0);
    row[0] = -1.0;
    double rhs = -lag.value;
    for (std::size_t c = 0; c < m; ++c) {
      row[c + 1] = g[c];
      rhs += g[c] * lambda[c];
    }
    master.ineq_a.push_back(std::move(row));
    master.ineq_b.push_back(rhs);
  }
  result.status = CutStatus::iteration_cap;
  return result;
}

RepairResult repair_feasibility(const CmdpContext& ctx, std::vector<double> lambda,
                                const SolverOptions& options) {
  if (options.phi <= 0.0) throw std::invalid_argument("repair_feasibility: phi must be positive");
  if (lambda.size() != ctx.constraints.size())
    throw std::invalid_argument("repair_feasibility: multiplier count mismatch");
  for (int iter = 0; iter <= options.max_repair_iterations; ++iter) {
    LagrangianResult lag = lagrangian(ctx, lambda, options.exec, true);
    const PolicyEvaluation eval = evaluate_policy(ctx, lag.policy, options.exec, false);
    bool feasible = true;
    for (std::size_t c = 0; c < lambda.size(); ++c)
      if (ctx.constraints[c].bound - eval.constraint_totals[c] < -kSlackTol) feasible = false;
    if (feasible) return {std::move(lag.policy), std::move(lambda), iter};
    for (std::size_t c = 0; c < lambda.size(); ++c)
      if (ctx.constraints[c].bound - eval.constraint_totals[c] < -kSlackTol)
        lambda[c] = lambda[c] == 0.0 ? kRepairSeed : lambda[c] * (1.0 + options.phi);
  }
  throw InfeasibleError("repair_feasibility: no feasible policy within the iteration cap");
}

KktCheck kkt_and_determinism(const CmdpContext& ctx, const std::vector<double>& lambda,
                             const PolicyTable& policy, Exec exec) {
  const PolicyEvaluation eval = evaluate_policy(ctx, policy, exec, true);
  double residual = 0.0;
  for (std::size_t c = 0; c < lambda.size(); ++c)
    residual += lambda[c] * (ctx.constraints[c].bound - eval.constraint_totals[c]);
  return {std::fabs(residual), !eval.randomized_on_support};
}

SolveReport solve(const CmdpContext& ctx, const SolverOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const CutPlaneResult cut = cutting_plane(ctx, options);
  if (cut.status == CutStatus::infeasible)
    throw InfeasibleError("solve: dual run reports the constrained problem infeasible");
  if (cut.status == CutStatus::iteration_cap)
    throw NumericError("solve: cutting plane hit the iteration cap; best dual value " +
                       std::to_string(cut.dual_value));

  RepairResult repair = repair_feasibility(ctx, cut.lambda, options);
  const PolicyEvaluation eval = evaluate_policy(ctx, repair.policy, options.exec, true);

  SolveReport report;
  report.lambda = repair.lambda;
  report.dual_value = cut.dual_value;
  report.achieved_objective = eval.objective_total;
  report.relative_gap =
      cut.dual_value != 0.0 ? (cut.dual_value - eval.objective_total) / cut.dual_value : 0.0;
  report.slacks.resize(ctx.constraints.size());
  double residual = 0.0;
  for (std::size_t c = 0; c < ctx.constraints.size(); ++c) {
    report.slacks[c] = ctx.constraints[c].bound - eval.constraint_totals[c];
    residual += repair.lambda[c] * report.slacks[c];
  }
  report.kkt_residual = std::fabs(residual);
  report.cut_iterations = cut.iterations;
  report.repair_iterations = repair.iterations;
  report.deterministic = !eval.randomized_on_support;
  report.box_active = cut.box_active;
  report.policy = std::move(repair.policy);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

ExactLpResult exact_lp_policy(const CmdpContext& ctx) {
  const int n = ctx.idx.horizon();
  if (n > 8)
    throw std::invalid_argument("exact_lp_policy: guarded to horizons n <= 8");
  const std::size_t d_lt = ctx.idx.num_nonterminal();
  const std::size_t d_term = stage_size(n);
  const std::size_t num_vars = 2 * d_lt + d_term;
  const std::size_t num_rows = ctx.idx.num_states();
  const double p = ctx.problem.p;

  LinearProgram lp;
  lp.num_vars = num_vars;
  lp.objective.assign(num_vars, 0.0);
  lp.eq_a.assign(num_rows, std::vector<double>(num_vars, 0.0));
  lp.eq_b.assign(num_rows, 0.0);
  lp.eq_b[0] = 1.0;  // all flow starts in the empty state

  // Flow rows: own occupancancy minus policy-weighted inflow.
  for (std::size_t g = 0; g < d_lt; ++g) {
    lp.eq_a[g][g] += 1.0;
    lp.eq_a[g][d_lt + g] += 1.0;
  }
  for (std::size_t j = 0; j < d_term; ++j) lp.eq_a[d_lt + j][2 * d_lt + j] += 1.0;
  for (std::size_t g = 0; g < d_lt; ++g) {
    const TrialState x = ctx.idx.unindex(g);
    const StateRef ref = make_ref(x);
    const double pc = ctx.kernel->success_c(ref);
    const double pd = ctx.kernel->success_d(ref);
    const TrialState cs = successor(x, Arm::control, Outcome::success);
    const TrialState cf = successor(x, Arm::control, Outcome::failure);
    const TrialState ds = successor(x, Arm::developmental, Outcome::success);
    const TrialState df = successor(x, Arm::developmental, Outcome::failure);
    for (int action = 0; action < 2; ++action) {
      const double delta = action == 0 ? p : 1.0 - p;
      const std::size_t col = action == 0 ? g : d_lt + g;
      lp.eq_a[ctx.idx.index(cs)][col] -= delta * pc;
      lp.eq_a[ctx.idx.index(cf)][col] -= delta * (1.0 - pc);
      lp.eq_a[ctx.idx.index(ds)][col] -= (1.0 - delta) * pd;
      lp.eq_a[ctx.idx.index(df)][col] -= (1.0 - delta) * (1.0 - pd);
    }
  }

  // Objective (maximize, so negate) and constraint rows over the same slots.
  for (std::size_t g = 0; g < d_lt; ++g) {
    const TrialState x = ctx.idx.unindex(g);
    lp.objective[g] = -stage_reward_value(ctx.objective, ctx.idx, x, p);
    lp.objective[d_lt + g] = -stage_reward_value(ctx.objective, ctx.idx, x, 1.0 - p);
  }
  if (!ctx.objective.terminal.empty())
    for (std::size_t j = 0; j < d_term; ++j) lp.objective[2 * d_lt + j] = -ctx.objective.terminal[j];

  for (const auto& pc : ctx.constraints) {
    std::vector<double> row(num_vars, 0.0);
    if (pc.reweighted.has_running()) {
      for (std::size_t g = 0; g < d_lt; ++g) {
        const TrialState x = ctx.idx.unindex(g);
        row[g] = stage_reward_value(pc.reweighted, ctx.idx, x, p);
        row[d_lt + g] = stage_reward_value(pc.reweighted, ctx.idx, x, 1.0 - p);
      }
    }
    if (!pc.reweighted.terminal.empty())
      for (std::size_t j = 0; j < d_term; ++j) row[2 * d_lt + j] = pc.reweighted.terminal[j];
    lp.ineq_a.push_back(std::move(row));
    lp.ineq_b.push_back(pc.bound);
  }

  const LpSolution sol = ::ratrial::solve(lp);
  if (sol.status == LpStatus::infeasible) return {false, 0.0, {}};
  if (sol.status != LpStatus::optimal)
    throw NumericError("exact_lp_policy: occupancy program unbounded");

  std::vector<double> probs(d_lt, 0.5);
  for (std::size_t g = 0; g < d_lt; ++g) {
    const double mu_p = sol.x[g];
    const double mu_q = sol.x[d_lt + g];
    const double total = mu_p + mu_q;
    if (total > 1e-14) probs[g] = (p * mu_p + (1.0 - p) * mu_q) / total;
  }
  ExactLpResult result;
  result.feasible = true;
  result.value = -sol.objective;
  result.policy = PolicyTable::dense(n, p, std::move(probs));
  return result;
}

}  // namespace ratrial
