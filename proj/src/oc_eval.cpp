#include "ratrial/oc_eval.hpp"

#include <cmath>
#include <stdexcept>

#include "ratrial/special_functions.hpp"

namespace ratrial {

OcRow evaluate_oc(const StateIndexer& idx, const PolicyTable& policy, double theta_c,
                  double theta_d, double alpha, const TerminalTable& table, Exec exec) {
  const int n = idx.horizon();
  if (table.horizon != n || policy.horizon() != n)
    throw std::invalid_argument("evaluate_oc: horizon mismatch");
  const PredictiveTables kernel(Measure{PointMass{theta_c, theta_d}}, n);
  const StateDistribution dist = forward_distribution(idx, kernel, policy, exec);
  const std::size_t count = dist.probs.size();

  // Four terminal functionals, each with the fixed-order reduction.
  std::vector<double> buf(count);
  const double effect = theta_d - theta_c;
  for (int n_c = 0; n_c <= n; ++n_c) {
    const int n_d = n - n_c;
    std::size_t j = StateIndexer::block_offset(n, n_c);
    for (int s_c = 0; s_c <= n_c; ++s_c)
      for (int s_d = 0; s_d <= n_d; ++s_d, ++j) buf[j] = dist.probs[j] * n_c;
  }
  const double mean_alloc_c = pairwise_sum(buf.data(), count) / n;
  for (std::size_t j = 0; j < count; ++j)
    buf[j] = table.pvalues[j] <= alpha ? dist.probs[j] : 0.0;
  const double rejection = pairwise_sum(buf.data(), count);
  for (std::size_t j = 0; j < count; ++j) buf[j] = dist.probs[j] * (table.estimates[j] - effect);
  const double bias = pairwise_sum(buf.data(), count);
  for (std::size_t j = 0; j < count; ++j) {
    const double g = table.estimates[j] - effect;
    buf[j] = dist.probs[j] * g * g;
  }
  const double mse = pairwise_sum(buf.data(), count);

  OcRow row;
  row.theta_c = theta_c;
  row.theta_d = theta_d;
  if (theta_c > theta_d)
    row.patient_benefit = mean_alloc_c;
  else if (theta_d > theta_c)
    row.patient_benefit = 1.0 - mean_alloc_c;
  else
    row.patient_benefit = 0.5;
  row.rejection_rate = rejection;
  row.bias = bias;
  row.mse = mse;
  return row;
}

std::vector<OcRow> sweep_oc(const StateIndexer& idx, const PolicyTable& policy, double theta_c,
                            std::span<const double> theta_d_grid, double alpha,
                            const TerminalTable& table, Exec exec) {
  std::vector<OcRow> rows(theta_d_grid.size());
  if (exec == Exec::parallel) {
    // Grid points are independent; each inner evaluation runs serially.
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < theta_d_grid.size(); ++i)
      rows[i] = evaluate_oc(idx, policy, theta_c, theta_d_grid[i], alpha, table, Exec::serial);
  } else {
    for (std::size_t i = 0; i < theta_d_grid.size(); ++i)
      rows[i] = evaluate_oc(idx, policy, theta_c, theta_d_grid[i], alpha, table, Exec::serial);
  }
  return rows;
}

}  // namespace ratrial
