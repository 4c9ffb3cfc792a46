#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ratrial/cmdp.hpp"
#include "ratrial/designs.hpp"
#include "ratrial/terminal_stats.hpp"

using namespace ratrial;

namespace {

const IndependentBeta kUniform{1, 1, 1, 1};

CmdpProblem unconstrained(int n, double p) {
  CmdpProblem problem;
  problem.horizon = n;
  problem.p = p;
  problem.objective_measure = kUniform;
  return problem;
}

SolverOptions serial_options() {
  SolverOptions options;
  options.exec = Exec::serial;
  return options;
}

// Small test-and-power style problem used by several cases below.
CmdpProblem small_test_problem(int n, double alpha_star, double beta) {
  const TerminalTable table = build_terminal_table(n, Exec::serial);
  DesignSpec spec;
  spec.tag = DesignTag::cmdp_t;
  spec.n = n;
  spec.p = 0.9;
  spec.prior = kUniform;
  spec.alpha = 0.35;  // loose level so small horizons can reject at all
  spec.alpha_star = alpha_star;
  spec.beta = beta;
  return build_cmdp_t(spec, table);
}

}  // namespace

TEST_CASE("reweighting matches the likelihood-ratio definition") {
  const int n = 4;
  CmdpProblem problem = unconstrained(n, 0.9);
  ConstraintSpec c;
  c.measure = PooledNull{1, 1};
  c.running_mean_coeff = 1.0;
  c.terminal.assign(stage_size(n), 1.0);
  c.bound = 1.0;
  problem.constraints.push_back(c);
  const CmdpContext ctx = prepare(std::move(problem), Exec::serial);

  // Ratio q_0 / q at (1, 1, 1, 1) under uniform against pooled: (1/3)/(1/4).
  const TrialState x{1, 1, 1, 1};
  CHECK(ctx.constraints[0].weight->weight(make_ref(x)) ==
        doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(ctx.constraints[0].weight->weight(make_ref(TrialState{})) == doctest::Approx(1.0));

  const RewardSpec reweighted = reweight_constraint(ctx, 0);
  const std::size_t local = StateIndexer::local_index(n, 2, 1, 1);
  const TrialState terminal{1, 1, 2, 2};
  const double want = std::exp(log_marginal_likelihood(Measure{PooledNull{1, 1}}, terminal) -
                               log_marginal_likelihood(Measure{kUniform}, terminal));
  CHECK(reweighted.terminal[local] == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("a constraint under the objective measure reweights to itself") {
  CmdpProblem problem = unconstrained(3, 0.9);
  ConstraintSpec c;
  c.measure = kUniform;
  c.running_mean_coeff = 1.0;
  c.bound = 1.0;
  problem.constraints.push_back(c);
  const CmdpContext ctx = prepare(std::move(problem), Exec::serial);
  const StateIndexer idx(3);
  for (std::size_t g = 0; g < idx.num_states(); ++g)
    CHECK(ctx.constraints[0].weight->weight(make_ref(idx.unindex(g))) ==
          doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("change of measure: constraint expectations agree across both routes, n <= 4") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (const Measure& constraint_measure :
       {Measure{PooledNull{2.0, 1.0}},
        Measure{IndependentBeta{2.0, 1.0, 1.0, 3.0}},
        Measure{TruncatedIndependentBeta{kUniform, Rectangle{0.1, 0.7, 0.3, 0.9}}}}) {
    for (int n : {2, 3, 4}) {
      const StateIndexer idx(n);
      CmdpProblem problem = unconstrained(n, 0.9);
      ConstraintSpec c;
      c.measure = constraint_measure;
      c.running_mean_coeff = 0.7;
      c.rho_c_dense.resize(idx.num_nonterminal());
      c.rho_d_dense.resize(idx.num_nonterminal());
      c.kappa.resize(idx.num_nonterminal());
      for (std::size_t g = 0; g < idx.num_nonterminal(); ++g) {
        c.rho_c_dense[g] = coef(rng);
        c.rho_d_dense[g] = coef(rng);
        c.kappa[g] = coef(rng);
      }
      c.terminal.resize(stage_size(n));
      for (double& v : c.terminal) v = coef(rng);
      c.bound = 0.0;
      CmdpProblem with = problem;
      with.constraints.push_back(c);
      const CmdpContext ctx = prepare(std::move(with), Exec::serial);

      std::mt19937 prng(n);
      std::uniform_real_distribution<double> pd(0.1, 0.9);
      std::vector<double> probs(idx.num_nonterminal());
      for (double& v : probs) v = pd(prng);
      const PolicyTable policy = PolicyTable::dense(n, 0.9, std::move(probs));

      // Route 1: expectation under the constraint's own measure.
      const PredictiveTables c_kernel(constraint_measure, n);
      const auto c_means = std::make_shared<PredictiveTables>(constraint_measure, n);
      RewardSpec raw;
      raw.mean_terms.push_back({0.7, c_means, nullptr});
      raw.rho_c_dense = c.rho_c_dense;
      raw.rho_d_dense = c.rho_d_dense;
      raw.kappa = c.kappa;
      raw.terminal = c.terminal;
      const double direct = expected_total(idx, c_kernel, policy, raw, Exec::serial);

      // Route 2: reweighted expectation under the objective measure.
      const auto eval = evaluate_policy(ctx, policy, Exec::serial);
      CHECK(eval.constraint_totals[0] == doctest::Approx(direct).epsilon(1e-10));

      // Route 3: exhaustive histories under the constraint measure.
      const double brute = ratrial::testing::brute_force_expected_total(
          constraint_measure, ratrial::testing::as_policy_fn(idx, policy), n,
          [&](const TrialState& x, double delta) {
            const std::size_t g = idx.index(x);
            const double rho_c =
                c.rho_c_dense[g] + 0.7 * predictive_success_prob(constraint_measure, x, Arm::control);
            const double rho_d = c.rho_d_dense[g] +
                                 0.7 * predictive_success_prob(constraint_measure, x,
                                                               Arm::developmental);
            return delta * rho_c + (1.0 - delta) * rho_d + c.kappa[g];
          },
          [&](const TrialState& x) { return c.terminal[idx.index(x) - idx.stage_offset(n)]; });
      CHECK(direct == doctest::Approx(brute).epsilon(1e-10));
    }
  }
}

TEST_CASE("lagrangian at zero multipliers is the unconstrained value") {
  CmdpProblem problem = unconstrained(2, 1.0);
  ConstraintSpec c;
  c.measure = PooledNull{1, 1};
  c.running_mean_coeff = 1.0;
  c.bound = 100.0;
  problem.constraints.push_back(c);
  const CmdpContext ctx = prepare(std::move(problem), Exec::serial);
  const auto lag = lagrangian(ctx, {0.0}, Exec::serial);
  CHECK(lag.value == doctest::Approx(13.0 / 12.0).epsilon(1e-12));
  CHECK_THROWS(lagrangian(ctx, {-0.5}, Exec::serial));
}

TEST_CASE("lagrangian offset uses the bound exactly once") {
  CmdpProblem problem = unconstrained(2, 1.0);
  ConstraintSpec c;
  c.measure = kUniform;
  c.running_mean_coeff = 1.0;
  c.bound = 0.75;
  problem.constraints.push_back(c);
  const CmdpContext ctx = prepare(std::move(problem), Exec::serial);
  const double lambda = 0.375;
  const auto lag = lagrangian(ctx, {lambda}, Exec::serial);
  CHECK(lag.value == doctest::Approx(lag.dp_value + lambda * 0.75).epsilon(1e-13));
}

TEST_CASE("subgradient components") {
  const int n = 3;
  CmdpProblem problem = unconstrained(n, 0.9);
  ConstraintSpec huge;
  huge.measure = PooledNull{1, 1};
  huge.running_mean_coeff = 1.0;
  huge.bound = 100.0;  // never binding
  problem.constraints.push_back(huge);
  problem.constraints.push_back(huge);  // duplicate
  const CmdpContext ctx = prepare(std::move(problem), Exec::serial);
  const auto lag = lagrangian(ctx, {0.0, 0.0}, Exec::serial);
  const auto g = subgradient(ctx, lag.policy, Exec::serial);
  CHECK(g[0] > 0.0);                      // vacuous bound leaves positive slack
  CHECK(g[0] == doctest::Approx(g[1]));   // duplicates match
  // Expected pooled successes are n * prior mean for any policy.
  CHECK(g[0] == doctest::Approx(100.0 - n / 2.0).epsilon(1e-9));
}

TEST_CASE("subgradient vanishes when the bound sits at the unconstrained optimum") {
  CmdpProblem problem = unconstrained(2, 1.0);
  ConstraintSpec c;
  c.measure = kUniform;
  c.running_mean_coeff = 1.0;
  c.bound = 13.0 / 12.0;
  problem.constraints.push_back(c);
  const CmdpContext ctx = prepare(std::move(problem), Exec::serial);
  const auto lag = lagrangian(ctx, {0.0}, Exec::serial);
  const auto g = subgradient(ctx, lag.policy, Exec::serial);
  CHECK(g[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cutting plane without constraints stops after two iterations") {
  const CmdpContext ctx = prepare(unconstrained(2, 1.0), Exec::serial);
  const auto cut = cutting_plane(ctx, serial_options());
  CHECK(cut.status == CutStatus::converged);
  CHECK(cut.iterations <= 2);
  CHECK(cut.dual_value == doctest::Approx(13.0 / 12.0).epsilon(1e-12));
}

TEST_CASE("vacuous constraint keeps the unconstrained optimum and zero multiplier") {
  CmdpProblem problem = unconstrained(2, 1.0);
  ConstraintSpec c;
  c.measure = kUniform;
  c.running_mean_coeff = 1.0;
  c.bound = 2.0;  // horizon bounds the total reward by 2
  problem.constraints.push_back(c);
  const CmdpContext ctx = prepare(std::move(problem), Exec::serial);
  const auto cut = cutting_plane(ctx, serial_options());
  CHECK(cut.status == CutStatus::converged);
  CHECK(cut.dual_value == doctest::Approx(13.0 / 12.0).epsilon(1e-9));
  CHECK(cut.lambda[0] == doctest::Approx(0.0));

  const auto repair = repair_feasibility(ctx, cut.lambda, serial_options());
  CHECK(repair.iterations == 0);  // already feasible
  const auto report = solve(ctx, serial_options());
  CHECK(report.achieved_objective == doctest::Approx(13.0 / 12.0).epsilon(1e-9));
  CHECK(report.relative_gap <= 1e-9);
  CHECK(report.repair_iterations == 0);
  CHECK(report.kkt_residual <= 1e-9);
}

TEST_CASE("kkt residual and determinism flags") {
  const CmdpContext ctx = prepare(unconstrained(3, 0.9), Exec::serial);
  const auto lag = lagrangian(ctx, {}, Exec::serial);
  const auto kkt = kkt_and_determinism(ctx, {}, lag.policy, Exec::serial);
  CHECK(kkt.complementary_slackness == 0.0);  // no multipliers at all
  CHECK(kkt.deterministic);                   // asymmetric posteriors break all ties
  const auto er = kkt_and_determinism(ctx, {}, PolicyTable::constant(3, 0.9, 0.5), Exec::serial);
  CHECK_FALSE(er.deterministic);
}

TEST_CASE("dual function is convex and the cut bounds are monotone") {
  CmdpProblem problem = small_test_problem(4, 0.4, 0.75);
  const CmdpContext ctx = prepare(std::move(problem), Exec::serial);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  for (int trial = 0; trial < 25; ++trial) {
    const std::vector<double> l1 = {lam(rng), lam(rng)};
    const std::vector<double> l2 = {lam(rng), lam(rng)};
    const double tau = 0.37;
    std::vector<double> mid(2);
    for (int c = 0; c < 2; ++c) mid[c] = tau * l1[c] + (1.0 - tau) * l2[c];
    const double lmid = lagrangian(ctx, mid, Exec::serial, false).value;
    const double bound = tau * lagrangian(ctx, l1, Exec::serial, false).value +
                         (1.0 - tau) * lagrangian(ctx, l2, Exec::serial, false).value;
    CHECK(lmid <= bound + 1e-9);
  }
}

TEST_CASE("exact occupancy program agrees with backward induction when unconstrained") {
  const CmdpContext ctx = prepare(unconstrained(2, 1.0), Exec::serial);
  const auto exact = exact_lp_policy(ctx);
  REQUIRE(exact.feasible);
  CHECK(exact.value == doctest::Approx(13.0 / 12.0).epsilon(1e-9));
  // The extracted policy must realize the same value.
  CHECK(evaluate_policy(ctx, exact.policy, Exec::serial).objective_total ==
        doctest::Approx(exact.value).epsilon(1e-9));
}

TEST_CASE("exact occupancy program vs cutting plane on constrained instances") {
  // Three small instances with binding constraints.
  std::vector<CmdpProblem> problems;
  problems.push_back(small_test_problem(4, 0.30, 0.80));
  problems.push_back(small_test_problem(5, 0.25, 0.85));
  {
    CmdpProblem robust = unconstrained(5, 0.9);
    const double v_li = dp_policy(5, kUniform, Exec::serial).value;
    ConstraintSpec c;
    c.measure = kUniform;
    c.running_mean_coeff = -1.0;
    c.bound = -0.97 * v_li;
    robust.constraints.push_back(c);
    problems.push_back(std::move(robust));
  }
  for (CmdpProblem& problem : problems) {
    const CmdpContext ctx = prepare(std::move(problem), Exec::serial);
    const auto exact = exact_lp_policy(ctx);
    REQUIRE(exact.feasible);
    const auto cut = cutting_plane(ctx, serial_options());
    REQUIRE(cut.status == CutStatus::converged);
    CHECK(exact.value == doctest::Approx(cut.dual_value).epsilon(1e-6));

    // Duality sandwich: the repaired policy cannot beat the exact optimum.
    const auto report = solve(ctx, serial_options());
    CHECK(report.achieved_objective <= exact.value + 1e-7);
    CHECK(exact.value <= cut.dual_value + 1e-7);
    CHECK(report.relative_gap >= -1e-9);
    for (double slack : report.slacks) CHECK(slack >= -1e-9);

    // The LP occupancies integrate to one per stage.
    const StateIndexer& idx = ctx.idx;
    const auto lp_eval = evaluate_policy(ctx, exact.policy, Exec::serial);
    for (std::size_t c = 0; c < ctx.constraints.size(); ++c)
      CHECK(lp_eval.constraint_totals[c] <= ctx.constraints[c].bound + 1e-7);
    (void)idx;
  }
}

TEST_CASE("exact occupancy program reports infeasibility for impossible bounds") {
  CmdpProblem problem = unconstrained(3, 0.9);
  ConstraintSpec c;
  c.measure = kUniform;
  c.running_mean_coeff = -1.0;
  c.bound = -10.0;  // demands more successes than the horizon allows
  problem.constraints.push_back(c);
  const CmdpContext ctx = prepare(std::move(problem), Exec::serial);
  CHECK_FALSE(exact_lp_policy(ctx).feasible);
  const auto cut = cutting_plane(ctx, serial_options());
  CHECK(cut.status == CutStatus::infeasible);
  CHECK_THROWS_AS(solve(ctx, serial_options()), InfeasibleError);
}

TEST_CASE("exact occupancy program is guarded to small horizons") {
  const CmdpContext ctx = prepare(unconstrained(9, 0.9), Exec::serial);
  CHECK_THROWS(exact_lp_policy(ctx));
}

TEST_CASE("point-mass objectives are rejected at build time") {
  CmdpProblem problem;
  problem.horizon = 2;
  problem.p = 0.9;
  problem.objective_measure = PointMass{0.5, 0.5};
  CHECK_THROWS(prepare(std::move(problem), Exec::serial));
}

TEST_CASE("repair multiplies violated multipliers until feasibility") {
  CmdpProblem problem = small_test_problem(4, 0.28, 0.8);
  const CmdpContext ctx = prepare(std::move(problem), Exec::serial);
  // Start from zero multipliers: the greedy policy ignores the constraints.
  const auto repair = repair_feasibility(ctx, {0.0, 0.0}, serial_options());
  const auto eval = evaluate_policy(ctx, repair.policy, Exec::serial);
  for (std::size_t c = 0; c < ctx.constraints.size(); ++c)
    CHECK(ctx.constraints[c].bound - eval.constraint_totals[c] >= -1e-9);
}
