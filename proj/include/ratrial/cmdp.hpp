#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ratrial/errors.hpp"
#include "ratrial/exec.hpp"
#include "ratrial/lp.hpp"
#include "ratrial/mdp.hpp"
#include "ratrial/measures.hpp"

namespace ratrial {

/// One expected-total constraint E_c[sum of rewards] <= bound, with its own
/// measure. The reward is declared under the constraint's measure and gets
/// reweighted onto the objective measure when the problem is prepared.
struct ConstraintSpec {
  Measure measure;
  double running_mean_coeff = 0.0;  // coefficient on the posterior-mean reward under `measure`
  std::vector<double> rho_c_dense;  // optional dense stage rewards (small horizons)
  std::vector<double> rho_d_dense;
  std::vector<double> kappa;
  std::vector<double> terminal;     // by terminal local index, under `measure`
  double bound = 0.0;
  std::string label;
};

/// Objective measure, randomization bound, horizon and measured constraints.
struct CmdpProblem {
  int horizon = 0;
  double p = 0.95;
  Measure objective_measure;         // must be an independent Beta law
  double objective_mean_coeff = 1.0; // weight on posterior-mean successes
  std::vector<double> objective_terminal;
  std::vector<ConstraintSpec> constraints;
};

/// Tables and reweighted rewards materialized once per problem.
struct CmdpContext {
  CmdpProblem problem;
  StateIndexer idx;
  std::shared_ptr<const PredictiveTables> kernel;  // objective predictive transitions
  std::shared_ptr<const LogMarginalTables> objective_logq;
  RewardSpec objective;

  struct PreparedConstraint {
    double bound = 0.0;
    std::string label;
    std::shared_ptr<const PredictiveTables> means;   // under the constraint measure
    std::shared_ptr<const LogMarginalTables> logq;
    std::shared_ptr<const ReweightTables> weight;
    RewardSpec reweighted;                           // expectation moved under the objective
  };
  std::vector<PreparedConstraint> constraints;

  std::size_t num_constraints() const { return constraints.size(); }
};

/// Builds every table and reweighted reward. Validates that the objective
/// measure keeps q(x) > 0 everywhere (independent Beta), which is the
/// hypothesis the change of measure needs.
CmdpContext prepare(CmdpProblem problem, Exec exec = Exec::parallel);

/// Reweighted constraint reward under the objective measure (copy).
RewardSpec reweight_constraint(const CmdpContext& ctx, std::size_t c);

struct LagrangianResult {
  double value = 0.0;      // L(lambda), bound offset included
  double dp_value = 0.0;   // backward value before the sum of lambda_c * bound_c
  PolicyTable policy;      // greedy maximizer, ties at 1/2
};

/// L(lambda) by backward induction with stage rewards r - sum_c lambda_c
/// r~_c; the constant sum_c lambda_c V_c is added once as an offset.
LagrangianResult lagrangian(const CmdpContext& ctx, const std::vector<double>& lambda,
                            Exec exec = Exec::parallel, bool want_policy = true);

/// Expected totals of every reweighted constraint plus the objective, and
/// whether a randomized action is reachable, in one forward pass.
struct PolicyEvaluation {
  std::vector<double> constraint_totals;  // E[sum r~_c] per constraint
  double objective_total = 0.0;
  bool randomized_on_support = false;
};
PolicyEvaluation evaluate_policy(const CmdpContext& ctx, const PolicyTable& policy,
                                 Exec exec = Exec::parallel, bool check_support = false);

/// Subgradient of L at lambda: component c is bound_c - E[sum r~_c] under
/// the greedy policy for that lambda.
std::vector<double> subgradient(const CmdpContext& ctx, const PolicyTable& greedy,
                                Exec exec = Exec::parallel);

struct SolverOptions {
  double eps_tol = 1e-9;
  double phi = 0.01;
  double lambda_box = 1e6;
  int max_cut_iterations = 10000;
  int max_repair_iterations = 100000;
  Exec exec = Exec::parallel;
};

enum class CutStatus { converged, infeasible, iteration_cap };

struct CutPlaneResult {
  CutStatus status = CutStatus::converged;
  double dual_value = 0.0;   // f*, an upper bound on the constrained optimum
  double lower_bound = 0.0;
  std::vector<double> lambda;
  int iterations = 0;
  bool box_active = false;   // a multiplier ended on the safety box
};

/// Kelley cutting-plane outer loop on the dual. The master minimizes x_1
/// over the accumulated cuts (plus a box on the multipliers) and each
/// iteration adds the cut x_1 >= L(lambda*) + g.(lambda - lambda*).
CutPlaneResult cutting_plane(const CmdpContext& ctx, const SolverOptions& options = {});

struct RepairResult {
  PolicyTable policy;
  std::vector<double> lambda;
  int iterations = 0;
};

/// Multiplies the multipliers of violated constraints by (1 + phi) until
/// the greedy policy satisfies every constraint (slack >= -1e-9). A zero
/// multiplier on a violated constraint is seeded at 1e-6 first.
RepairResult repair_feasibility(const CmdpContext& ctx, std::vector<double> lambda,
                                const SolverOptions& options = {});

struct KktCheck {
  double complementary_slackness = 0.0;  // |sum_c lambda_c (bound_c - E[sum r~_c])|
  bool deterministic = false;            // no 1/2 action reachable under the objective
};
KktCheck kkt_and_determinism(const CmdpContext& ctx, const std::vector<double>& lambda,
                             const PolicyTable& policy, Exec exec = Exec::parallel);

struct SolveReport {
  std::vector<double> lambda;        // final multipliers (after repair)
  double dual_value = 0.0;           // f*
  PolicyTable policy;                // feasible policy
  double achieved_objective = 0.0;
  double relative_gap = 0.0;         // (dual_value - achieved) / dual_value
  std::vector<double> slacks;        // bound_c - E[sum r~_c], >= -1e-9
  int cut_iterations = 0;
  int repair_iterations = 0;
  double kkt_residual = 0.0;
  bool deterministic = false;
  bool box_active = false;
  double wall_seconds = 0.0;
};

/// Full pipeline: cutting plane, feasibility repair, certification numbers.
/// Throws InfeasibleError when the dual run reports an infeasible problem
/// or repair cannot reach feasibility; NumericError on iteration caps.
SolveReport solve(const CmdpContext& ctx, const SolverOptions& options = {});

struct ExactLpResult {
  bool feasible = false;
  double value = 0.0;
  PolicyTable policy;
};

/// Occupancy-measure linear program over state-action visit probabilities;
/// exact for small horizons (guarded at n <= 8). The randomized policy is
/// read off the optimal occupancies, 1/2 where a state is never visited.
ExactLpResult exact_lp_policy(const CmdpContext& ctx);

}  // namespace ratrial
