#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ratrial/designs.hpp"
#include "ratrial/oc_eval.hpp"
#include "ratrial/special_functions.hpp"

using namespace ratrial;

TEST_CASE("operating characteristics at hand-checkable corners") {
  const int n = 8;
  const StateIndexer idx(n);
  const TerminalTable table = build_terminal_table(n, Exec::serial);
  SUBCASE("always-control policy with a truly better control arm") {
    const PolicyTable always_c = PolicyTable::constant(n, 1.0, 1.0);
    const OcRow row = evaluate_oc(idx, always_c, 0.7, 0.2, 0.1, table, Exec::serial);
    CHECK(row.patient_benefit == doctest::Approx(1.0));
  }
  SUBCASE("equal arms pin patient benefit at one half by definition") {
    const PolicyTable always_c = PolicyTable::constant(n, 1.0, 1.0);
    const OcRow row = evaluate_oc(idx, always_c, 0.4, 0.4, 0.1, table, Exec::serial);
    CHECK(row.patient_benefit == 0.5);
  }
  SUBCASE("mse dominates squared bias") {
    const PolicyTable er = er_policy(n);
    for (double theta_d : {0.1, 0.45, 0.8}) {
      const OcRow row = evaluate_oc(idx, er, 0.5, theta_d, 0.1, table, Exec::serial);
      CHECK(row.mse >= row.bias * row.bias - 1e-12);
    }
  }
}

TEST_CASE("brute-force oracle at n <= 4") {
  const int n = 4;
  const StateIndexer idx(n);
  const TerminalTable table = build_terminal_table(n, Exec::serial);
  const double theta_c = 0.55, theta_d = 0.3, alpha = 0.35;
  const Measure m = PointMass{theta_c, theta_d};

  std::vector<double> probs(idx.num_nonterminal());
  for (std::size_t g = 0; g < probs.size(); ++g) probs[g] = 0.3 + 0.05 * (g % 9);
  const PolicyTable policy = PolicyTable::dense(n, 0.9, std::move(probs));
  const OcRow row = evaluate_oc(idx, policy, theta_c, theta_d, alpha, table, Exec::serial);

  const auto dist = ratrial::testing::brute_force_stage_distribution(
      m, ratrial::testing::as_policy_fn(idx, policy), n, n);
  double mean_alloc = 0.0, rr = 0.0, mean_est = 0.0, mse = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    const TrialState x = idx.unindex(idx.stage_offset(n) + j);
    mean_alloc += dist[j] * x.n_c;
    rr += dist[j] * (fisher_pvalue(x) <= alpha ? 1.0 : 0.0);
    mean_est += dist[j] * effect_estimate(x);
    const double gap = effect_estimate(x) - (theta_d - theta_c);
    mse += dist[j] * gap * gap;
  }
  CHECK(row.patient_benefit == doctest::Approx(mean_alloc / n).epsilon(1e-10));
  CHECK(row.rejection_rate == doctest::Approx(rr).epsilon(1e-10));
  CHECK(row.bias == doctest::Approx(mean_est - (theta_d - theta_c)).epsilon(1e-10));
  CHECK(row.mse == doctest::Approx(mse).epsilon(1e-10));
}

TEST_CASE("sweeps preserve grid order and handle the empty grid") {
  const int n = 6;
  const StateIndexer idx(n);
  const TerminalTable table = build_terminal_table(n, Exec::serial);
  const PolicyTable er = er_policy(n);
  CHECK(sweep_oc(idx, er, 0.5, {}, 0.1, table, Exec::serial).empty());
  const double grid[] = {0.0, 0.5, 1.0};
  const auto rows = sweep_oc(idx, er, 0.5, grid, 0.1, table, Exec::serial);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].theta_d == grid[i]);
    CHECK(rows[i].patient_benefit == doctest::Approx(0.5).epsilon(1e-12));
  }
  // Parallel and serial sweeps agree bitwise.
  const auto rows_par = sweep_oc(idx, er, 0.5, grid, 0.1, table, Exec::parallel);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].rejection_rate == rows_par[i].rejection_rate);
    CHECK(rows[i].mse == rows_par[i].mse);
  }
}

TEST_CASE("equal-randomization curves are symmetric around theta_c = 0.5") {
  const int n = 50;
  const StateIndexer idx(n);
  const TerminalTable table = build_terminal_table(n);
  const PolicyTable er = er_policy(n);
  for (double offset : {0.1, 0.25, 0.4}) {
    const OcRow lo = evaluate_oc(idx, er, 0.5, 0.5 - offset, 0.1, table);
    const OcRow hi = evaluate_oc(idx, er, 0.5, 0.5 + offset, 0.1, table);
    CHECK(lo.rejection_rate == doctest::Approx(hi.rejection_rate).epsilon(1e-10));
    CHECK(lo.bias == doctest::Approx(-hi.bias).epsilon(1e-10));
    CHECK(lo.mse == doctest::Approx(hi.mse).epsilon(1e-10));
  }
}

TEST_CASE("terminal distributions stay normalized across a sweep") {
  const int n = 10;
  const StateIndexer idx(n);
  const TerminalTable table = build_terminal_table(n, Exec::serial);
  const PolicyTable policy = dp_policy(n, IndependentBeta{1, 1, 1, 1}, Exec::serial).policy;
  for (double theta_d : {0.0, 0.3, 0.7, 1.0}) {
    const PredictiveTables kernel(Measure{PointMass{0.5, theta_d}}, n);
    const auto dist = forward_distribution(idx, kernel, policy, Exec::serial);
    CHECK(pairwise_sum(dist.probs.data(), dist.probs.size()) ==
          doctest::Approx(1.0).epsilon(1e-10));
  }
}
