#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ratrial/exec.hpp"
#include "ratrial/measures.hpp"
#include "ratrial/state_space.hpp"

namespace ratrial {

/// Two-sided conditional exact p-value for the final 2x2 table, with the
/// margins (n_c, n_d, s) of the observed table held fixed. Tables whose
/// hypergeometric probability is within relative tolerance 1e-9 of the
/// observed one count as tied and are included.
double fisher_pvalue(const TrialState& x);

/// True when the test rejects at level alpha (weak inequality).
bool reject(const TrialState& x, double alpha);
inline bool reject(double pvalue, double alpha) { return pvalue <= alpha; }

/// Treatment effect estimate theta_d_hat - theta_c_hat. Per-arm maximum
/// likelihood estimates when both arms received someone; otherwise the
/// (s+1)/(n+2) adjustment applied to both arms.
double effect_estimate(const TrialState& x);

/// Posterior mean squared error of the effect estimate over a rectangle:
/// (estimate - posterior mean of the effect)^2 plus the sum of per-arm
/// posterior variances, with independent Beta posteriors truncated to the
/// rectangle. `prior` carries the estimation pseudo-counts.
double posterior_mse_terminal(const TrialState& x, const Rectangle& rect,
                              const IndependentBeta& prior);

/// Per-terminal-state statistics shared by every policy and measure at a
/// given horizon. Immutable after construction.
struct TerminalTable {
  int horizon = 0;
  std::vector<double> pvalues;    // by stage-n local index
  std::vector<double> estimates;  // theta_d_hat - theta_c_hat
};

TerminalTable build_terminal_table(int horizon, Exec exec = Exec::parallel);

/// Posterior MSE values for every terminal state, for one rectangle.
std::vector<double> build_mse_terminal(int horizon, const Rectangle& rect,
                                       const IndependentBeta& prior,
                                       Exec exec = Exec::parallel);

/// On-disk cache: 16-byte header (8-byte magic, u32 version, u32 horizon)
/// followed by the p-value and estimate arrays as little-endian doubles.
void save_terminal_table(const TerminalTable& table, const std::string& path);
TerminalTable load_terminal_table(const std::string& path, int expected_horizon);

}  // namespace ratrial
