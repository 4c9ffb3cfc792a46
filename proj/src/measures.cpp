#include "ratrial/measures.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ratrial/special_functions.hpp"

namespace ratrial {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string("measure: ") + what + " must be positive");
}

// log of theta^s (1-theta)^(n-s) with the 0^0 = 1 convention.
double log_bernoulli_mass(double theta, int s, int n) {
  double v = 0.0;
  if (s > 0) v += theta > 0.0 ? s * std::log(theta) : -kInf;
  if (n - s > 0) v += theta < 1.0 ? (n - s) * std::log1p(-theta) : -kInf;
  return v;
}

// log of the per-arm marginal factor under a Beta(s0, f0) prior.
double log_beta_binomial_factor(double s0, double f0, int s, int n) {
  return log_beta(s0 + s, f0 + n - s) - log_beta(s0, f0);
}

// log marginal factor for one arm of a truncated Beta prior.
double log_truncated_factor(double s0, double f0, double lo, double hi, int s, int n) {
  const double post = log_beta(s0 + s, f0 + n - s) + log_inc_beta_diff(s0 + s, f0 + n - s, lo, hi);
  const double norm = log_beta(s0, f0) + log_inc_beta_diff(s0, f0, lo, hi);
  return post - norm;
}

}  // namespace

void validate(const Measure& m) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, IndependentBeta>) {
          check_positive(v.s_c, "pseudo count");
          check_positive(v.f_c, "pseudo count");
          check_positive(v.s_d, "pseudo count");
          check_positive(v.f_d, "pseudo count");
        } else if constexpr (std::is_same_v<T, PooledNull>) {
          check_positive(v.s, "pseudo count");
          check_positive(v.f, "pseudo count");
        } else if constexpr (std::is_same_v<T, TruncatedIndependentBeta>) {
          check_positive(v.base.s_c, "pseudo count");
          check_positive(v.base.f_c, "pseudo count");
          check_positive(v.base.s_d, "pseudo count");
          check_positive(v.base.f_d, "pseudo count");
          if (!v.rect.valid()) throw std::invalid_argument("measure: degenerate rectangle");
        } else {
          if (v.theta_c < 0.0 || v.theta_c > 1.0 || v.theta_d < 0.0 || v.theta_d > 1.0)
            throw std::invalid_argument("measure: point mass outside [0,1]^2");
        }
      },
      m);
}

double log_marginal_likelihood(const Measure& m, const TrialState& x) {
  if (!x.valid()) throw std::invalid_argument("log_marginal_likelihood: invalid state");
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, IndependentBeta>) {
          return log_beta_binomial_factor(v.s_c, v.f_c, x.s_c, x.n_c) +
                 log_beta_binomial_factor(v.s_d, v.f_d, x.s_d, x.n_d);
        } else if constexpr (std::is_same_v<T, PooledNull>) {
          return log_beta_binomial_factor(v.s, v.f, x.successes(), x.stage());
        } else if constexpr (std::is_same_v<T, TruncatedIndependentBeta>) {
          return log_truncated_factor(v.base.s_c, v.base.f_c, v.rect.c_lo, v.rect.c_hi, x.s_c, x.n_c) +
                 log_truncated_factor(v.base.s_d, v.base.f_d, v.rect.d_lo, v.rect.d_hi, x.s_d, x.n_d);
        } else {
          return log_bernoulli_mass(v.theta_c, x.s_c, x.n_c) +
                 log_bernoulli_mass(v.theta_d, x.s_d, x.n_d);
        }
      },
      m);
}

double predictive_success_prob(const Measure& m, const TrialState& x, Arm arm) {
  if (!x.valid()) throw std::invalid_argument("predictive_success_prob: invalid state");
  const int s = arm == Arm::control ? x.s_c : x.s_d;
  const int n = arm == Arm::control ? x.n_c : x.n_d;
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, IndependentBeta>) {
          const double s0 = arm == Arm::control ? v.s_c : v.s_d;
          const double f0 = arm == Arm::control ? v.f_c : v.f_d;
          return (s0 + s) / (s0 + f0 + n);
        } else if constexpr (std::is_same_v<T, PooledNull>) {
          return (v.s + x.successes()) / (v.s + v.f + x.stage());
        } else if constexpr (std::is_same_v<T, TruncatedIndependentBeta>) {
          const double s0 = arm == Arm::control ? v.base.s_c : v.base.s_d;
          const double f0 = arm == Arm::control ? v.base.f_c : v.base.f_d;
          const double lo = arm == Arm::control ? v.rect.c_lo : v.rect.d_lo;
          const double hi = arm == Arm::control ? v.rect.c_hi : v.rect.d_hi;
          return truncated_beta_moment_or_midpoint(s0 + s, f0 + n - s, lo, hi, 1);
        } else {
          return arm == Arm::control ? v.theta_c : v.theta_d;
        }
      },
      m);
}

PredictiveTables::PredictiveTables(const Measure& m, int horizon)
    : measure_(m), horizon_(horizon) {
  validate(m);
  if (horizon < 0) throw std::invalid_argument("PredictiveTables: negative horizon");
  const std::size_t len = tri_index(horizon, horizon) + 1;
  const auto fill_arm = [&](std::vector<double>& tab, double s0, double f0) {
    tab.resize(len);
    for (int n = 0; n <= horizon; ++n)
      for (int s = 0; s <= n; ++s) tab[tri_index(n, s)] = (s0 + s) / (s0 + f0 + n);
  };
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, IndependentBeta>) {
          mode_ = Mode::per_arm;
          fill_arm(arm_c_, v.s_c, v.f_c);
          fill_arm(arm_d_, v.s_d, v.f_d);
        } else if constexpr (std::is_same_v<T, PooledNull>) {
          mode_ = Mode::pooled;
          fill_arm(pool_, v.s, v.f);
        } else if constexpr (std::is_same_v<T, TruncatedIndependentBeta>) {
          mode_ = Mode::per_arm;
          const auto fill_trunc = [&](std::vector<double>& tab, double s0, double f0, double lo,
                                      double hi) {
            tab.resize(len);
            for (int n = 0; n <= horizon; ++n)
              for (int s = 0; s <= n; ++s)
                tab[tri_index(n, s)] =
                    truncated_beta_moment_or_midpoint(s0 + s, f0 + n - s, lo, hi, 1);
          };
          fill_trunc(arm_c_, v.base.s_c, v.base.f_c, v.rect.c_lo, v.rect.c_hi);
          fill_trunc(arm_d_, v.base.s_d, v.base.f_d, v.rect.d_lo, v.rect.d_hi);
        } else {
          mode_ = Mode::constant;
          const_c_ = v.theta_c;
          const_d_ = v.theta_d;
        }
      },
      m);
}

LogMarginalTables::LogMarginalTables(const Measure& m, int horizon) {
  validate(m);
  if (horizon < 0) throw std::invalid_argument("LogMarginalTables: negative horizon");
  const std::size_t len = tri_index(horizon, horizon) + 1;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PooledNull>) {
          pool_.resize(len);
          for (int n = 0; n <= horizon; ++n)
            for (int s = 0; s <= n; ++s)
              pool_[tri_index(n, s)] = log_beta_binomial_factor(v.s, v.f, s, n);
        } else {
          arm_c_.resize(len);
          arm_d_.resize(len);
          const auto fill = [&](std::vector<double>& tab, auto factor) {
            for (int n = 0; n <= horizon; ++n)
              for (int s = 0; s <= n; ++s) tab[tri_index(n, s)] = factor(s, n);
          };
          if constexpr (std::is_same_v<T, IndependentBeta>) {
            fill(arm_c_, [&](int s, int n) { return log_beta_binomial_factor(v.s_c, v.f_c, s, n); });
            fill(arm_d_, [&](int s, int n) { return log_beta_binomial_factor(v.s_d, v.f_d, s, n); });
          } else if constexpr (std::is_same_v<T, TruncatedIndependentBeta>) {
            fill(arm_c_, [&](int s, int n) {
              return log_truncated_factor(v.base.s_c, v.base.f_c, v.rect.c_lo, v.rect.c_hi, s, n);
            });
            fill(arm_d_, [&](int s, int n) {
              return log_truncated_factor(v.base.s_d, v.base.f_d, v.rect.d_lo, v.rect.d_hi, s, n);
            });
          } else {
            fill(arm_c_, [&](int s, int n) { return log_bernoulli_mass(v.theta_c, s, n); });
            fill(arm_d_, [&](int s, int n) { return log_bernoulli_mass(v.theta_d, s, n); });
          }
        }
      },
      m);
}

ReweightTables::ReweightTables(const LogMarginalTables& constraint,
                               const LogMarginalTables& objective) {
  if (objective.arm_c().empty() || !objective.pool().empty())
    throw std::invalid_argument("ReweightTables: objective measure must factorize per arm");
  const auto& oc = objective.arm_c();
  const auto& od = objective.arm_d();
  if (constraint.per_arm()) {
    // Fully factored ratio q_c / q.
    fac_c_.resize(oc.size());
    fac_d_.resize(od.size());
    for (std::size_t i = 0; i < oc.size(); ++i) fac_c_[i] = std::exp(constraint.arm_c()[i] - oc[i]);
    for (std::size_t i = 0; i < od.size(); ++i) fac_d_[i] = std::exp(constraint.arm_d()[i] - od[i]);
  } else {
    // Pooled numerator over 1/q per arm.
    fac_c_.resize(oc.size());
    fac_d_.resize(od.size());
    fac_pool_.resize(constraint.pool().size());
    for (std::size_t i = 0; i < oc.size(); ++i) fac_c_[i] = std::exp(-oc[i]);
    for (std::size_t i = 0; i < od.size(); ++i) fac_d_[i] = std::exp(-od[i]);
    for (std::size_t i = 0; i < fac_pool_.size(); ++i)
      fac_pool_[i] = std::exp(constraint.pool()[i]);
  }
}

}  // namespace ratrial
