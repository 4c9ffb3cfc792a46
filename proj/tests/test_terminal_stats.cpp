#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "ratrial/special_functions.hpp"
#include "ratrial/terminal_stats.hpp"

using namespace ratrial;

TEST_CASE("exact test p-values on small tables") {
  // Margins (2, 2, 2): table probabilities 1/6, 4/6, 1/6.
  CHECK(fisher_pvalue(TrialState{2, 0, 2, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(fisher_pvalue(TrialState{1, 1, 2, 2}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fisher_pvalue(TrialState{0, 0, 3, 1}) == doctest::Approx(1.0));  // no successes at all
  CHECK(reject(TrialState{2, 0, 2, 2}, 0.1) == false);
  CHECK(reject(0.05, 0.1) == true);
  CHECK(reject(0.1, 0.1) == true);  // weak inequality
}

TEST_CASE("p-values are symmetric under swapping the arms") {
  const int n = 9;
  for (int n_c = 0; n_c <= n; ++n_c)
    for (int s_c = 0; s_c <= n_c; ++s_c)
      for (int s_d = 0; s_d <= n - n_c; ++s_d) {
        const TrialState x{s_c, s_d, n_c, n - n_c};
        const TrialState swapped{s_d, s_c, n - n_c, n_c};
        CHECK(fisher_pvalue(x) == doctest::Approx(fisher_pvalue(swapped)).epsilon(1e-12));
      }
}

TEST_CASE("hypergeometric probabilities over shared margins sum to one") {
  const int n = 11;
  for (int n_c = 0; n_c <= n; ++n_c)
    for (int s = 0; s <= n; ++s) {
      const int n_d = n - n_c;
      double total = 0.0;
      bool any = false;
      for (int s_c = std::max(0, s - n_d); s_c <= std::min(n_c, s); ++s_c) {
        const double l = std::lgamma(n_c + 1.0) - std::lgamma(s_c + 1.0) -
                         std::lgamma(n_c - s_c + 1.0) + std::lgamma(n_d + 1.0) -
                         std::lgamma(s - s_c + 1.0) - std::lgamma(n_d - (s - s_c) + 1.0) -
                         (std::lgamma(n + 1.0) - std::lgamma(s + 1.0) - std::lgamma(n - s + 1.0));
        total += std::exp(l);
        any = true;
      }
      if (any) CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("bulk terminal table matches the single-state path") {
  const int n = 10;
  const TerminalTable table = build_terminal_table(n, Exec::serial);
  const TerminalTable table_par = build_terminal_table(n, Exec::parallel);
  CHECK(table.pvalues == table_par.pvalues);
  CHECK(table.estimates == table_par.estimates);
  for (int n_c = 0; n_c <= n; ++n_c)
    for (int s_c = 0; s_c <= n_c; ++s_c)
      for (int s_d = 0; s_d <= n - n_c; ++s_d) {
        const TrialState x{s_c, s_d, n_c, n - n_c};
        const std::size_t local = StateIndexer::local_index(n, n_c, s_c, s_d);
        CHECK(table.pvalues[local] == doctest::Approx(fisher_pvalue(x)).epsilon(1e-12));
        CHECK(table.estimates[local] == doctest::Approx(effect_estimate(x)).epsilon(1e-14));
        CHECK(table.pvalues[local] > 0.0);
        CHECK(table.pvalues[local] <= 1.0 + 1e-12);
      }
}

TEST_CASE("effect estimator switches to the adjusted form when an arm is empty") {
  CHECK(effect_estimate(TrialState{1, 2, 2, 2}) == doctest::Approx(0.5));
  CHECK(effect_estimate(TrialState{0, 2, 0, 2}) == doctest::Approx(0.25));
  CHECK(effect_estimate(TrialState{0, 0, 0, 2}) == doctest::Approx(-0.25));
}

TEST_CASE("posterior mse of the effect estimate") {
  const IndependentBeta uniform{1, 1, 1, 1};
  const Rectangle unit{};
  SUBCASE("hand-computed one-participant case") {
    // Adjusted estimate -1/6, posterior means Beta(2,1) and Beta(1,1),
    // variances 1/18 and 1/12.
    CHECK(posterior_mse_terminal(TrialState{1, 0, 1, 0}, unit, uniform) ==
          doctest::Approx(5.0 / 36.0).epsilon(1e-12));
  }
  SUBCASE("balanced case reduces to twice a posterior variance") {
    CHECK(posterior_mse_terminal(TrialState{1, 1, 2, 2}, unit, uniform) ==
          doctest::Approx(0.1).epsilon(1e-12));  // 2 * Var(Beta(2, 2))
  }
  SUBCASE("quadrature oracle, assorted states and rectangles") {
    const Rectangle rects[] = {unit, {0.25, 0.5, 0.5, 0.75}, {0.0, 0.5, 0.0, 1.0}};
    const TrialState states[] = {{1, 1, 1, 1}, {0, 3, 2, 4}, {2, 0, 3, 1}, {4, 1, 5, 2},
                                 {0, 0, 1, 2}, {3, 3, 3, 3}, {1, 4, 2, 6}, {2, 2, 4, 2},
                                 {0, 5, 0, 5}, {1, 0, 4, 0}};
    for (const Rectangle& rect : rects)
      for (const TrialState& x : states) {
        const double got = posterior_mse_terminal(x, rect, uniform);
        const double want = ratrial::testing::quadrature_posterior_mse(x, rect, uniform);
        CHECK(got == doctest::Approx(want).epsilon(1e-6));
      }
  }
  SUBCASE("posterior variance shrinks as the prior concentrates") {
    const TrialState x{2, 1, 3, 2};
    double previous = posterior_mse_terminal(x, unit, uniform);
    const double estimate = effect_estimate(x);
    for (double scale : {10.0, 100.0, 1000.0}) {
      const IndependentBeta concentrated{scale, scale, scale, scale};
      const double value = posterior_mse_terminal(x, unit, concentrated);
      CHECK(value < previous);
      previous = value;
    }
    // In the concentration limit only the squared offset remains.
    const IndependentBeta spike{1e6, 1e6, 1e6, 1e6};
    const double offset = estimate - 0.0;
    CHECK(posterior_mse_terminal(x, unit, spike) ==
          doctest::Approx(offset * offset).epsilon(1e-3));
  }
  SUBCASE("degenerate rectangle errors") {
    CHECK_THROWS(posterior_mse_terminal(TrialState{1, 1, 1, 1}, Rectangle{0.3, 0.3, 0, 1}, uniform));
  }
}

TEST_CASE("bulk mse table matches the per-state function") {
  const int n = 6;
  const IndependentBeta prior{1, 1, 1, 1};
  const Rectangle rect{0.25, 0.5, 0.5, 0.75};
  const auto table = build_mse_terminal(n, rect, prior, Exec::serial);
  for (int n_c = 0; n_c <= n; ++n_c)
    for (int s_c = 0; s_c <= n_c; ++s_c)
      for (int s_d = 0; s_d <= n - n_c; ++s_d) {
        const TrialState x{s_c, s_d, n_c, n - n_c};
        CHECK(table[StateIndexer::local_index(n, n_c, s_c, s_d)] ==
              doctest::Approx(posterior_mse_terminal(x, rect, prior)).epsilon(1e-10));
      }
}

TEST_CASE("terminal table cache round-trips") {
  const TerminalTable table = build_terminal_table(7, Exec::serial);
  const auto path = std::filesystem::temp_directory_path() / "ratrial-terminal-test.bin";
  save_terminal_table(table, path.string());
  const TerminalTable loaded = load_terminal_table(path.string(), 7);
  CHECK(loaded.horizon == 7);
  CHECK(loaded.pvalues == table.pvalues);
  CHECK(loaded.estimates == table.estimates);
  CHECK_THROWS(load_terminal_table(path.string(), 8));
  std::filesystem::remove(path);
}
