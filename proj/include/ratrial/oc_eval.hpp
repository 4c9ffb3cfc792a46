#pragma once

#include <span>
#include <vector>

#include "ratrial/exec.hpp"
#include "ratrial/mdp.hpp"
#include "ratrial/terminal_stats.hpp"

namespace ratrial {

/// Frequentist operating characteristics of a policy at one parameter pair.
struct OcRow {
  double theta_c = 0.0;
  double theta_d = 0.0;
  double patient_benefit = 0.0;  // expected fraction on the truly better arm
  double rejection_rate = 0.0;   // P(test rejects at level alpha)
  double bias = 0.0;             // E[effect estimate] - true effect
  double mse = 0.0;              // E[(effect estimate - true effect)^2]
};

/// Exact forward recursion under the point mass at (theta_c, theta_d).
OcRow evaluate_oc(const StateIndexer& idx, const PolicyTable& policy, double theta_c,
                  double theta_d, double alpha, const TerminalTable& table,
                  Exec exec = Exec::parallel);

/// One row per grid value of theta_d, in grid order.
std::vector<OcRow> sweep_oc(const StateIndexer& idx, const PolicyTable& policy, double theta_c,
                            std::span<const double> theta_d_grid, double alpha,
                            const TerminalTable& table, Exec exec = Exec::parallel);

}  // namespace ratrial
