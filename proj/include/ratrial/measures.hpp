#pragma once

#include <cstddef>
#include <memory>
#include <variant>
#include <vector>

#include "ratrial/state_space.hpp"

namespace ratrial {

/// Axis-aligned rectangle of success probabilities, one interval per arm.
struct Rectangle {
  double c_lo = 0.0, c_hi = 1.0;
  double d_lo = 0.0, d_hi = 1.0;
  bool valid() const {
    return 0.0 <= c_lo && c_lo < c_hi && c_hi <= 1.0 && 0.0 <= d_lo && d_lo < d_hi && d_hi <= 1.0;
  }
};

/// Independent Beta prior per arm, parameterized by pseudo successes and
/// failures (all strictly positive).
struct IndependentBeta {
  double s_c = 1.0, f_c = 1.0;
  double s_d = 1.0, f_d = 1.0;
};

/// Single Beta prior on a success probability shared by both arms
/// (theta_c = theta_d enforced), i.e. the pooled law under equality.
struct PooledNull {
  double s = 1.0, f = 1.0;
};

/// Independent Beta prior per arm truncated to a rectangle.
struct TruncatedIndependentBeta {
  IndependentBeta base;
  Rectangle rect;
};

/// Degenerate law at fixed success probabilities; used for frequentist
/// operating-characteristic evaluation.
struct PointMass {
  double theta_c = 0.5;
  double theta_d = 0.5;
};

/// A law on the pair of success probabilities. Supplies marginal
/// likelihoods q(x) and predictive transition kernels.
using Measure = std::variant<IndependentBeta, PooledNull, TruncatedIndependentBeta, PointMass>;

void validate(const Measure& m);

/// log q_m(x) = log of the prior predictive probability of the outcome
/// counts recorded in x. -inf when q_m(x) = 0 (possible only for point
/// masses on the boundary and degenerate truncations).
double log_marginal_likelihood(const Measure& m, const TrialState& x);

/// Probability that the next outcome on `arm` is a success, given x;
/// the first posterior moment of theta_arm under m.
double predictive_success_prob(const Measure& m, const TrialState& x, Arm arm);

/// Per-state lookup coordinates shared by all table classes below.
struct StateRef {
  int n_c, s_c, n_d, s_d;
  std::size_t tri_c;    // tri_index(n_c, s_c)
  std::size_t tri_d;    // tri_index(n_d, s_d)
  std::size_t tri_pool; // tri_index(n_c + n_d, s_c + s_d)
};

inline StateRef make_ref(const TrialState& x) {
  return StateRef{x.n_c, x.s_c, x.n_d, x.s_d, tri_index(x.n_c, x.s_c),
                  tri_index(x.n_d, x.s_d), tri_index(x.stage(), x.successes())};
}

/// Precomputed predictive success probabilities for every count pair that
/// can occur up to a horizon. Read-only after construction.
class PredictiveTables {
 public:
  PredictiveTables(const Measure& m, int horizon);

  double success(Arm arm, const StateRef& r) const {
    return arm == Arm::control ? success_c(r) : success_d(r);
  }
  double success_c(const StateRef& r) const {
    switch (mode_) {
      case Mode::per_arm: return arm_c_[r.tri_c];
      case Mode::pooled: return pool_[r.tri_pool];
      default: return const_c_;
    }
  }
  double success_d(const StateRef& r) const {
    switch (mode_) {
      case Mode::per_arm: return arm_d_[r.tri_d];
      case Mode::pooled: return pool_[r.tri_pool];
      default: return const_d_;
    }
  }
  const Measure& measure() const { return measure_; }
  int horizon() const { return horizon_; }

 private:
  enum class Mode { per_arm, pooled, constant };
  Measure measure_;
  int horizon_;
  Mode mode_;
  std::vector<double> arm_c_, arm_d_, pool_;
  double const_c_ = 0.0, const_d_ = 0.0;
};

/// Precomputed log marginal likelihoods, factored per arm where the
/// measure factorizes and over pooled counts otherwise.
class LogMarginalTables {
 public:
  LogMarginalTables(const Measure& m, int horizon);

  double log_q(const StateRef& r) const {
    double v = 0.0;
    if (!arm_c_.empty()) v += arm_c_[r.tri_c] + arm_d_[r.tri_d];
    if (!pool_.empty()) v += pool_[r.tri_pool];
    return v;
  }
  bool per_arm() const { return !arm_c_.empty() && pool_.empty(); }
  const std::vector<double>& arm_c() const { return arm_c_; }
  const std::vector<double>& arm_d() const { return arm_d_; }
  const std::vector<double>& pool() const { return pool_; }

 private:
  std::vector<double> arm_c_, arm_d_, pool_;
};

/// Change-of-measure factor tables: weight(x) = q_c(x) / q(x) as a product
/// of per-arm and pooled factors, so the hot loops never call exp.
class ReweightTables {
 public:
  ReweightTables(const LogMarginalTables& constraint, const LogMarginalTables& objective);

  double weight(const StateRef& r) const {
    double w = 1.0;
    if (!fac_c_.empty()) w *= fac_c_[r.tri_c] * fac_d_[r.tri_d];
    if (!fac_pool_.empty()) w *= fac_pool_[r.tri_pool];
    return w;
  }

 private:
  std::vector<double> fac_c_, fac_d_, fac_pool_;
};

}  // namespace ratrial
