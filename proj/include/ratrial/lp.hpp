#pragma once

#include <stdexcept>
#include <vector>

namespace ratrial {

/// Dense linear program: minimize c.x subject to ineq_a x <= ineq_b,
/// eq_a x = eq_b and x >= 0.
struct LinearProgram {
  std::size_t num_vars = 0;
  std::vector<double> objective;
  std::vector<std::vector<double>> ineq_a;
  std::vector<double> ineq_b;
  std::vector<std::vector<double>> eq_a;
  std::vector<double> eq_b;
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;
  double objective = 0.0;
};

/// Raised when the tableau degenerates numerically (distinct from an
/// infeasible problem).
class LpNumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two-phase dense simplex with Bland's anti-cycling rule. Inequality-only
/// problems with many more rows than variables are pivoted through their
/// dual internally (same routine, basis sized by the variable count) and
/// the primal solution is recovered from the reduced costs.
LpSolution solve(const LinearProgram& lp);

}  // namespace ratrial
