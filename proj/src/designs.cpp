#include "ratrial/designs.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace ratrial {

std::string to_string(DesignTag tag) {
  switch (tag) {
    case DesignTag::er: return "er";
    case DesignTag::dp: return "dp";
    case DesignTag::crdp: return "crdp";
    case DesignTag::cmdp_t: return "cmdp-t";
    case DesignTag::cmdp_e1: return "cmdp-e1";
    case DesignTag::cmdp_e2: return "cmdp-e2";
    case DesignTag::cmdp_r: return "cmdp-r";
  }
  return "?";
}

std::optional<DesignTag> parse_design_tag(const std::string& name) {
  for (DesignTag tag : {DesignTag::er, DesignTag::dp, DesignTag::crdp, DesignTag::cmdp_t,
                        DesignTag::cmdp_e1, DesignTag::cmdp_e2, DesignTag::cmdp_r})
    if (to_string(tag) == name) return tag;
  return std::nullopt;
}

PolicyTable er_policy(int n) { return PolicyTable::constant(n, 0.5, 0.5); }

namespace {

RewardSpec posterior_mean_reward(std::shared_ptr<const PredictiveTables> means) {
  RewardSpec spec;
  spec.mean_terms.push_back({1.0, std::move(means), nullptr});
  return spec;
}

BackwardResult dp_like(int n, const IndependentBeta& prior, double p,
                       std::vector<double> terminal, Exec exec) {
  const StateIndexer idx(n);
  auto means = std::make_shared<PredictiveTables>(Measure{prior}, n);
  RewardSpec rewards = posterior_mean_reward(means);
  rewards.terminal = std::move(terminal);
  return backward_induction(idx, *means, rewards, p, exec);
}

}  // namespace

BackwardResult dp_policy(int n, const IndependentBeta& prior, Exec exec) {
  return dp_like(n, prior, 1.0, {}, exec);
}

BackwardResult crdp_policy(int n, const IndependentBeta& prior, Exec exec) {
  std::vector<double> penalty(stage_size(n), 0.0);
  for (int n_c = 0; n_c <= n; ++n_c) {
    const int n_d = n - n_c;
    if (static_cast<double>(std::min(n_c, n_d)) >= 0.15 * n) continue;
    for (int s_c = 0; s_c <= n_c; ++s_c)
      for (int s_d = 0; s_d <= n_d; ++s_d)
        penalty[StateIndexer::local_index(n, n_c, s_c, s_d)] = -static_cast<double>(n);
  }
  return dp_like(n, prior, 0.9, std::move(penalty), exec);
}

namespace {

std::vector<double> reject_indicator(const TerminalTable& table, double alpha, double sign) {
  std::vector<double> h(table.pvalues.size(), 0.0);
  for (std::size_t j = 0; j < h.size(); ++j)
    if (table.pvalues[j] <= alpha) h[j] = sign;
  return h;
}

void check_test_params(const DesignSpec& spec) {
  if (spec.alpha <= 0.0 || spec.alpha >= 1.0)
    throw std::invalid_argument("design: alpha must lie in (0, 1)");
  if (spec.alpha_star > spec.alpha)
    std::cerr << "warning: alpha* = " << spec.alpha_star << " exceeds alpha = " << spec.alpha
              << "; the averaged type I error bound no longer implies the pointwise one\n";
}

void add_test_constraints(const DesignSpec& spec, const TerminalTable& table, CmdpProblem* problem) {
  ConstraintSpec size;
  size.measure = spec.null_prior;
  size.terminal = reject_indicator(table, spec.alpha, 1.0);
  size.bound = spec.alpha_star;
  size.label = "type-i-error";
  problem->constraints.push_back(std::move(size));

  ConstraintSpec power;
  power.measure = spec.power_prior.value_or(spec.prior);
  power.terminal = reject_indicator(table, spec.alpha, -1.0);
  power.bound = -(1.0 - spec.beta);
  power.label = "power";
  problem->constraints.push_back(std::move(power));
}

CmdpProblem base_problem(const DesignSpec& spec) {
  CmdpProblem problem;
  problem.horizon = spec.n;
  problem.p = spec.p;
  problem.objective_measure = spec.prior;
  return problem;
}

}  // namespace

CmdpProblem build_cmdp_t(const DesignSpec& spec, const TerminalTable& table) {
  if (table.horizon != spec.n) throw std::invalid_argument("build_cmdp_t: horizon mismatch");
  check_test_params(spec);
  CmdpProblem problem = base_problem(spec);
  add_test_constraints(spec, table, &problem);
  return problem;
}

std::vector<Rectangle> e2_rectangles() {
  const double edges[] = {0.0, 0.25, 0.5, 0.75, 0.9, 1.0};
  std::vector<Rectangle> rects;
  for (int i = 0; i + 1 < 6; ++i)
    for (int j = 0; j + 1 < 6; ++j)
      rects.push_back({edges[i], edges[i + 1], edges[j], edges[j + 1]});
  return rects;
}

CmdpProblem build_cmdp_e(const DesignSpec& spec, const TerminalTable& table,
                         const PolicyTable& baseline, Exec exec) {
  if (table.horizon != spec.n || baseline.horizon() != spec.n)
    throw std::invalid_argument("build_cmdp_e: horizon mismatch");
  if (spec.xi < 1.0)
    throw std::invalid_argument("build_cmdp_e: xi must be at least 1 (bound relative to baseline)");
  check_test_params(spec);
  CmdpProblem problem = base_problem(spec);
  add_test_constraints(spec, table, &problem);

  const std::vector<Rectangle> rects =
      spec.tag == DesignTag::cmdp_e1 ? std::vector<Rectangle>{Rectangle{}} : e2_rectangles();
  const StateIndexer idx(spec.n);
  for (const Rectangle& rect : rects) {
    ConstraintSpec c;
    const TruncatedIndependentBeta measure{spec.estimation_prior, rect};
    c.measure = measure;
    c.terminal = build_mse_terminal(spec.n, rect, spec.estimation_prior, exec);
    // Baseline functional under the matching truncated prior fixes the bound.
    const PredictiveTables kernel(Measure{measure}, spec.n);
    RewardSpec functional;
    functional.terminal = c.terminal;
    c.bound = spec.xi * expected_total(idx, kernel, baseline, functional, exec);
    c.label = "posterior-mse";
    problem.constraints.push_back(std::move(c));
  }
  return problem;
}

CmdpProblem build_cmdp_r(const DesignSpec& spec, Exec exec) {
  if (spec.xi < 0.0 || spec.xi > 1.0)
    throw std::invalid_argument("build_cmdp_r: xi must lie in [0, 1]");
  CmdpProblem problem = base_problem(spec);
  const double v_li = dp_like(spec.n, spec.li_prior, spec.p, {}, exec).value;
  ConstraintSpec c;
  c.measure = spec.li_prior;
  c.running_mean_coeff = -1.0;  // keep at least xi * v_li successes under the LI prior
  c.bound = -spec.xi * v_li;
  c.label = "li-successes";
  problem.constraints.push_back(std::move(c));
  return problem;
}

DesignOutcome run_design(const DesignSpec& spec, const SolverOptions& options,
                         const TerminalTable* table) {
  const auto start = std::chrono::steady_clock::now();
  const Exec exec = options.exec;
  DesignOutcome outcome;
  outcome.spec = spec;

  const StateIndexer idx(spec.n);
  const auto prior_means = std::make_shared<PredictiveTables>(Measure{spec.prior}, spec.n);
  const RewardSpec success_reward = posterior_mean_reward(prior_means);
  const auto evaluate_successes = [&](const PolicyTable& policy) {
    return expected_total(idx, *prior_means, policy, success_reward, exec);
  };

  TerminalTable local_table;
  const auto need_table = [&]() -> const TerminalTable& {
    if (table) return *table;
    if (local_table.horizon != spec.n || local_table.pvalues.empty())
      local_table = build_terminal_table(spec.n, exec);
    return local_table;
  };

  switch (spec.tag) {
    case DesignTag::er: {
      outcome.policy = er_policy(spec.n);
      outcome.achieved_objective = evaluate_successes(outcome.policy);
      outcome.value = outcome.achieved_objective;
      break;
    }
    case DesignTag::dp: {
      BackwardResult dp = dp_policy(spec.n, spec.prior, exec);
      outcome.value = dp.value;
      outcome.policy = std::move(dp.policy);
      outcome.achieved_objective = evaluate_successes(outcome.policy);
      break;
    }
    case DesignTag::crdp: {
      BackwardResult crdp = crdp_policy(spec.n, spec.prior, exec);
      outcome.value = crdp.value;  // includes the terminal penalty
      outcome.policy = std::move(crdp.policy);
      outcome.achieved_objective = evaluate_successes(outcome.policy);
      break;
    }
    case DesignTag::cmdp_t:
    case DesignTag::cmdp_e1:
    case DesignTag::cmdp_e2:
    case DesignTag::cmdp_r: {
      CmdpProblem problem;
      if (spec.tag == DesignTag::cmdp_t) {
        problem = build_cmdp_t(spec, need_table());
      } else if (spec.tag == DesignTag::cmdp_r) {
        problem = build_cmdp_r(spec, exec);
      } else {
        const PolicyTable baseline = spec.tag == DesignTag::cmdp_e1
                                         ? er_policy(spec.n)
                                         : crdp_policy(spec.n, spec.prior, exec).policy;
        problem = build_cmdp_e(spec, need_table(), baseline, exec);
      }
      CmdpContext ctx = prepare(std::move(problem), exec);
      SolveReport report = ::ratrial::solve(ctx, options);
      outcome.value = report.dual_value;
      outcome.achieved_objective = report.achieved_objective;
      outcome.policy = report.policy;
      outcome.report = std::move(report);
      break;
    }
  }
  outcome.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return outcome;
}

}  // namespace ratrial
