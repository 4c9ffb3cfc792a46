#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ratrial/cmdp.hpp"
#include "ratrial/exec.hpp"
#include "ratrial/mdp.hpp"
#include "ratrial/measures.hpp"
#include "ratrial/terminal_stats.hpp"

namespace ratrial {

enum class DesignTag { er, dp, crdp, cmdp_t, cmdp_e1, cmdp_e2, cmdp_r };

std::string to_string(DesignTag tag);
std::optional<DesignTag> parse_design_tag(const std::string& name);

/// Everything needed to instantiate one of the named procedures.
struct DesignSpec {
  DesignTag tag = DesignTag::er;
  int n = 0;
  double p = 0.95;                     // randomization degree for the constrained designs
  IndependentBeta prior;               // optimisation prior
  double alpha = 0.1;                  // level of the terminal test

  // Size/power constraints (cmdp_t, cmdp_e1, cmdp_e2).
  double alpha_star = 0.05;
  double beta = 0.4;
  PooledNull null_prior;
  std::optional<IndependentBeta> power_prior;  // defaults to `prior`

  // Mean-squared-error constraints (cmdp_e1, cmdp_e2): bound factor and
  // estimation pseudo-counts.
  double xi = 1.0;
  IndependentBeta estimation_prior;

  // Prior-robustness constraint (cmdp_r): xi is reused as the fraction of
  // the less-informative optimum that must be retained.
  IndependentBeta li_prior;
};

/// pi(x) = 1/2 everywhere.
PolicyTable er_policy(int n);

/// Unconstrained dynamic programming at p = 1 with posterior-mean rewards.
BackwardResult dp_policy(int n, const IndependentBeta& prior, Exec exec = Exec::parallel);

/// Dynamic programming at p = 0.9 with a terminal penalty of -n whenever
/// either arm ends below 15% of the participants.
BackwardResult crdp_policy(int n, const IndependentBeta& prior, Exec exec = Exec::parallel);

/// Expected-success objective with a type I error constraint under the
/// pooled null prior and a power constraint under the power prior.
CmdpProblem build_cmdp_t(const DesignSpec& spec, const TerminalTable& table);

/// The 5x5 rectangle grid used by the E2 design (per-arm breakpoints
/// 0, 0.25, 0.5, 0.75, 0.9, 1).
std::vector<Rectangle> e2_rectangles();

/// CMDP-T constraints plus one posterior-MSE constraint per rectangle,
/// bounded by xi times the functional realised by `baseline` under the
/// matching truncated prior.
CmdpProblem build_cmdp_e(const DesignSpec& spec, const TerminalTable& table,
                         const PolicyTable& baseline, Exec exec = Exec::parallel);

/// Expected-success objective constrained to retain at least xi times the
/// optimal expected successes under the less-informative prior.
CmdpProblem build_cmdp_r(const DesignSpec& spec, Exec exec = Exec::parallel);

/// A solved (or directly constructed) design with its evaluation numbers.
struct DesignOutcome {
  DesignSpec spec;
  PolicyTable policy;
  double value = 0.0;               // backward value (comparators) or dual value f*
  double achieved_objective = 0.0;  // expected posterior-mean successes under the prior
  std::optional<SolveReport> report;
  double wall_seconds = 0.0;
};

/// Runs any design end to end. `table` may be shared across designs of the
/// same horizon; when null it is built on demand for the designs that test.
DesignOutcome run_design(const DesignSpec& spec, const SolverOptions& options = {},
                         const TerminalTable* table = nullptr);

}  // namespace ratrial
