#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ratrial/exec.hpp"
#include "ratrial/measures.hpp"
#include "ratrial/state_space.hpp"

namespace ratrial {

/// Allocation probability to control per non-terminal state, in storage
/// mapping order. Policies produced by backward induction take values in
/// {1-p, 1/2, p} and are stored as one byte per state; externally supplied
/// policies (equal randomization, files) may hold arbitrary probabilities
/// in [1-p, p] and are stored densely.
class PolicyTable {
 public:
  PolicyTable() = default;
  static PolicyTable dense(int horizon, double p, std::vector<double> probs);
  static PolicyTable coded(int horizon, double p, std::vector<std::uint8_t> codes);
  static PolicyTable constant(int horizon, double p, double prob);

  int horizon() const { return horizon_; }
  double p() const { return p_; }
  std::size_t size() const { return coded_ ? codes_.size() : probs_.size(); }
  bool is_coded() const { return coded_; }

  /// Action value for code 0 (1-p), 1 (1/2) or 2 (p).
  double action_value(int code) const;
  double prob(std::size_t flat) const {
    return coded_ ? action_value(codes_[flat]) : probs_[flat];
  }
  const std::vector<std::uint8_t>& codes() const { return codes_; }

  /// Copies the stage-t allocation probabilities into out[0..stage_size(t)).
  void stage_probs(const StateIndexer& idx, int t, double* out) const;

 private:
  int horizon_ = 0;
  double p_ = 1.0;
  bool coded_ = false;
  std::vector<double> probs_;
  std::vector<std::uint8_t> codes_;
};

/// Stage rewards linear in the allocation probability plus a terminal
/// reward: r(x, delta) = delta * rho_c(x) + (1-delta) * rho_d(x) + kappa(x)
/// for stages before the horizon; the horizon contributes only `terminal`.
///
/// The per-arm coefficients are sums of posterior-mean terms, each
/// optionally reweighted by a marginal likelihood ratio. Dense per-state
/// arrays are supported for small-horizon tests and oracles.
struct RewardSpec {
  struct MeanTerm {
    double coeff = 1.0;
    std::shared_ptr<const PredictiveTables> means;
    std::shared_ptr<const ReweightTables> weight;  // null: weight 1
  };
  std::vector<MeanTerm> mean_terms;
  std::vector<double> rho_c_dense;  // by flat non-terminal index
  std::vector<double> rho_d_dense;
  std::vector<double> kappa;        // by flat non-terminal index
  std::vector<double> terminal;     // by stage-horizon local index

  bool has_running() const {
    return !mean_terms.empty() || !rho_c_dense.empty() || !rho_d_dense.empty() || !kappa.empty();
  }
};

/// Probabilities over the states of a single stage.
struct StateDistribution {
  int stage = 0;
  std::vector<double> probs;
};

struct BackwardResult {
  double value = 0.0;
  PolicyTable policy;
};

/// Finite-horizon backward induction over the predictive kernel. The stage
/// objective is affine in the allocation probability, so the maximizer is
/// p or 1-p depending on the sign of the coefficient, with 1/2 on ties
/// (|coefficient| <= 1e-12). Value buffers are kept per stage and
/// overwritten in place.
BackwardResult backward_induction(const StateIndexer& idx, const PredictiveTables& kernel,
                                  const RewardSpec& rewards, double p,
                                  Exec exec = Exec::parallel, bool want_policy = true);

struct ForwardOptions {
  bool want_terminal = false;
  bool check_support = false;  // detect randomized actions on reachable states
  /// Called with each stage's distribution, terminal included. Test hook.
  std::function<void(int stage, std::span<const double>)> stage_hook;
};

struct ForwardEvaluation {
  std::vector<double> totals;    // one expected total per reward spec
  StateDistribution terminal;    // filled when requested
  bool randomized_on_support = false;
};

/// Exact push-forward of the point mass at the empty state through the
/// policy-weighted predictive transitions, accumulating the expected total
/// of every reward spec in a single pass. Per-stage sums use a fixed-order
/// pairwise reduction, so results do not depend on the thread count.
ForwardEvaluation forward_evaluate(const StateIndexer& idx, const PredictiveTables& kernel,
                                   const PolicyTable& policy,
                                   std::span<const RewardSpec* const> rewards,
                                   const ForwardOptions& options = {},
                                   Exec exec = Exec::parallel);

/// Terminal-state distribution only.
StateDistribution forward_distribution(const StateIndexer& idx, const PredictiveTables& kernel,
                                       const PolicyTable& policy, Exec exec = Exec::parallel);

/// Expected total of a single reward spec under the policy.
double expected_total(const StateIndexer& idx, const PredictiveTables& kernel,
                      const PolicyTable& policy, const RewardSpec& rewards,
                      Exec exec = Exec::parallel);

}  // namespace ratrial
