#pragma once

namespace ratrial {

/// log of the complete beta function B(a, b), a, b > 0.
double log_beta(double a, double b);

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and
/// x in [0, 1], to about 1e-13 relative accuracy. Continued-fraction
/// evaluation with the usual symmetry switch at x = (a+1)/(a+b+2).
double inc_beta(double a, double b, double x);

/// log of I_hi(a,b) - I_lo(a,b), evaluated tail-aware so that intervals
/// deep in either tail keep relative accuracy instead of cancelling.
/// Returns -inf when the interval carries no representable mass.
double log_inc_beta_diff(double a, double b, double lo, double hi);

/// I_hi(a,b) - I_lo(a,b); exp of the above.
double inc_beta_diff(double a, double b, double lo, double hi);

/// k-th raw moment (k = 1 or 2) of a Beta(a, b) distribution truncated to
/// [lo, hi]. Throws std::domain_error when the truncated mass is below
/// 1e-300 (degenerate interval).
double truncated_beta_moment(double a, double b, double lo, double hi, int k);

/// Non-throwing variant: when the truncated mass vanishes, reports the
/// interval midpoint for k = 1 and its square for k = 2 so that callers
/// weighting by that same vanishing mass stay finite.
double truncated_beta_moment_or_midpoint(double a, double b, double lo, double hi, int k);

/// Fixed-shape pairwise (tree) summation. The reduction order depends only
/// on the array length, never on thread count, so sums are reproducible.
double pairwise_sum(const double* x, unsigned long n);

}  // namespace ratrial
