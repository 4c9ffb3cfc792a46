#include <doctest.h>

#include <cmath>

#include "ratrial/designs.hpp"
#include "ratrial/oc_eval.hpp"

using namespace ratrial;

namespace {
const IndependentBeta kUniform{1, 1, 1, 1};
}

TEST_CASE("equal randomization policy") {
  CHECK(er_policy(1).size() == 1);
  CHECK(er_policy(2).size() == 5);
  const PolicyTable policy = er_policy(4);
  for (std::size_t g = 0; g < policy.size(); ++g) CHECK(policy.prob(g) == 0.5);
}

TEST_CASE("dynamic programming comparator") {
  CHECK(std::fabs(dp_policy(2, kUniform, Exec::serial).value - 13.0 / 12.0) < 1e-12);
  // First action ties under a symmetric prior.
  CHECK(dp_policy(3, kUniform, Exec::serial).policy.prob(0) == 0.5);
  // One participant: the value is the larger prior mean.
  const IndependentBeta skewed{2, 1, 1, 2};  // means 2/3 and 1/3
  CHECK(dp_policy(1, skewed, Exec::serial).value == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("penalized comparator steers allocations away from imbalance") {
  const int n = 6;  // penalty of -n whenever an arm ends with no participants
  const auto crdp = crdp_policy(n, kUniform, Exec::serial);
  CHECK(crdp.policy.p() == doctest::Approx(0.9));
  const StateIndexer idx(n);
  // Wherever one arm is still empty at the last decision, the policy pushes
  // the full 0.9 toward that arm.
  for (int n_c = 0; n_c <= n - 1; ++n_c) {
    const int n_d = n - 1 - n_c;
    for (int s_c = 0; s_c <= n_c; ++s_c)
      for (int s_d = 0; s_d <= n_d; ++s_d) {
        const TrialState x{s_c, s_d, n_c, n_d};
        const double prob = crdp.policy.prob(idx.index(x));
        if (n_c == 0) CHECK(prob == doctest::Approx(0.9));
        if (n_d == 0) CHECK(prob == doctest::Approx(0.1));
      }
  }
  // The unpenalized comparator has no such pull at e.g. all-developmental
  // histories with successes.
  const auto dp = dp_policy(n, kUniform, Exec::serial);
  const TrialState all_d{0, 4, 0, 5};
  CHECK(dp.policy.prob(idx.index(all_d)) < 0.9);
}

TEST_CASE("size-and-power problem wiring") {
  const int n = 6;
  const TerminalTable table = build_terminal_table(n, Exec::serial);
  DesignSpec spec;
  spec.tag = DesignTag::cmdp_t;
  spec.n = n;
  spec.p = 0.9;
  spec.prior = kUniform;
  spec.alpha = 0.3;
  spec.alpha_star = 0.2;
  spec.beta = 0.9;
  const CmdpProblem problem = build_cmdp_t(spec, table);
  REQUIRE(problem.constraints.size() == 2);
  CHECK(problem.constraints[0].bound == doctest::Approx(0.2));
  CHECK(problem.constraints[1].bound == doctest::Approx(-(1.0 - 0.9)));
  // Terminal rewards are +/- indicators of rejection.
  for (std::size_t j = 0; j < table.pvalues.size(); ++j) {
    const double expected = table.pvalues[j] <= spec.alpha ? 1.0 : 0.0;
    CHECK(problem.constraints[0].terminal[j] == expected);
    CHECK(problem.constraints[1].terminal[j] == -expected);
  }
}

TEST_CASE("degenerate size and power bounds reduce to the unconstrained optimum") {
  const int n = 4;
  const TerminalTable table = build_terminal_table(n, Exec::serial);
  DesignSpec spec;
  spec.tag = DesignTag::cmdp_t;
  spec.n = n;
  spec.p = 1.0;
  spec.prior = kUniform;
  spec.alpha = 0.3;
  spec.alpha_star = 1.0;  // vacuous
  spec.beta = 1.0;        // vacuous
  const CmdpContext ctx = prepare(build_cmdp_t(spec, table), Exec::serial);
  SolverOptions options;
  options.exec = Exec::serial;
  const SolveReport report = solve(ctx, options);
  const double dp_value = dp_policy(n, kUniform, Exec::serial).value;
  CHECK(report.achieved_objective == doctest::Approx(dp_value).epsilon(1e-9));
  CHECK(report.relative_gap <= 1e-8);
}

TEST_CASE("estimation-error problem wiring") {
  const int n = 5;
  const TerminalTable table = build_terminal_table(n, Exec::serial);
  DesignSpec spec;
  spec.tag = DesignTag::cmdp_e1;
  spec.n = n;
  spec.p = 0.9;
  spec.prior = kUniform;
  spec.alpha = 0.3;
  spec.alpha_star = 1.0;
  spec.beta = 1.0;
  spec.xi = 1.05;
  const PolicyTable baseline = er_policy(n);
  const CmdpProblem problem = build_cmdp_e(spec, table, baseline, Exec::serial);
  REQUIRE(problem.constraints.size() == 3);  // size, power, one unit rectangle

  // The bound is xi times the baseline functional; equal randomization is
  // feasible with slack exactly (xi - 1) times that functional.
  const CmdpContext ctx = prepare(problem, Exec::serial);
  const auto eval = evaluate_policy(ctx, baseline, Exec::serial);
  const double functional = eval.constraint_totals[2];
  CHECK(problem.constraints[2].bound == doctest::Approx(1.05 * functional).epsilon(1e-9));

  CHECK(e2_rectangles().size() == 25);
  CHECK_THROWS(build_cmdp_e([&] {
    DesignSpec bad = spec;
    bad.xi = 0.9;
    return bad;
  }(), table, baseline, Exec::serial));
}

TEST_CASE("robustness problem wiring and endpoints") {
  const int n = 5;
  DesignSpec spec;
  spec.tag = DesignTag::cmdp_r;
  spec.n = n;
  spec.p = 0.9;
  spec.prior = IndependentBeta{3, 7, 6, 4};
  spec.li_prior = kUniform;

  SUBCASE("xi = 0 leaves the constraint vacuous") {
    spec.xi = 0.0;
    const CmdpContext ctx = prepare(build_cmdp_r(spec, Exec::serial), Exec::serial);
    SolverOptions options;
    options.exec = Exec::serial;
    const SolveReport report = solve(ctx, options);
    // Unconstrained optimum under the informative prior at the same p.
    const StateIndexer idx(n);
    const auto means = std::make_shared<PredictiveTables>(Measure{spec.prior}, n);
    RewardSpec reward;
    reward.mean_terms.push_back({1.0, means, nullptr});
    const double unconstrained =
        backward_induction(idx, *means, reward, spec.p, Exec::serial).value;
    CHECK(report.achieved_objective == doctest::Approx(unconstrained).epsilon(1e-9));
    CHECK(std::fabs(report.relative_gap) <= 1e-9);
  }
  SUBCASE("xi = 1 with matching priors is achievable with zero slack") {
    spec.prior = kUniform;
    spec.xi = 1.0;
    const CmdpContext ctx = prepare(build_cmdp_r(spec, Exec::serial), Exec::serial);
    SolverOptions options;
    options.exec = Exec::serial;
    const SolveReport report = solve(ctx, options);
    const double v_li = [&] {
      const StateIndexer idx(n);
      const auto means = std::make_shared<PredictiveTables>(Measure{kUniform}, n);
      RewardSpec reward;
      reward.mean_terms.push_back({1.0, means, nullptr});
      return backward_induction(idx, *means, reward, spec.p, Exec::serial).value;
    }();
    CHECK(report.achieved_objective == doctest::Approx(v_li).epsilon(1e-9));
  }
  SUBCASE("xi outside [0, 1] is rejected") {
    spec.xi = 1.5;
    CHECK_THROWS(build_cmdp_r(spec, Exec::serial));
  }
}

TEST_CASE("equal randomization yields patient benefit one half at every parameter") {
  const int n = 12;
  const StateIndexer idx(n);
  const TerminalTable table = build_terminal_table(n, Exec::serial);
  const PolicyTable er = er_policy(n);
  for (double theta_d : {0.0, 0.2, 0.5, 0.9}) {
    const OcRow row = evaluate_oc(idx, er, 0.7, theta_d, 0.1, table, Exec::serial);
    CHECK(row.patient_benefit == doctest::Approx(0.5).epsilon(1e-10));
  }
}
