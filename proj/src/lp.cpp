#include "ratrial/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ratrial {

namespace {

constexpr double kCostTol = 1e-9;    // reduced-cost optimality threshold
constexpr double kPivotTol = 1e-11;  // smallest acceptable pivot element
constexpr double kPhase1Tol = 1e-8;  // residual infeasibility threshold

class SimplexTableau {
 public:
  // min c.v subject to rows (sense encoded by the caller via slack columns),
  // v >= 0. Rows arrive as (coeffs over structural+slack columns, rhs).
  SimplexTableau(std::size_t ncols, std::size_t nrows)
      : ncols_(ncols), nrows_(nrows), tab_(nrows * ncols, 0.0), rhs_(nrows, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return tab_[i * ncols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return tab_[i * ncols_ + j]; }
  double& rhs(std::size_t i) { return rhs_[i]; }

  void set_costs(std::vector<double> costs) { costs_ = std::move(costs); }
  void set_basis(std::vector<std::size_t> basis) { basis_ = std::move(basis); }
  const std::vector<std::size_t>& basis() const { return basis_; }

  void forbid_from(std::size_t first_forbidden) { first_forbidden_ = first_forbidden; }

  // Canonicalize: reduced costs r_j = c_j - sum_i c_{B_i} T_ij.
  void compute_reduced_costs() {
    reduced_ = costs_;
    for (std::size_t i = 0; i < nrows_; ++i) {
      const double cb = costs_[basis_[i]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < ncols_; ++j) reduced_[j] -= cb * at(i, j);
    }
  }

  // Bland's rule iteration until optimal or unbounded.
  LpStatus iterate() {
    const std::size_t max_iter = 2000 + 64 * (nrows_ + ncols_);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
      std::size_t enter = ncols_;
      for (std::size_t j = 0; j < first_forbidden_; ++j)
        if (reduced_[j] < -kCostTol && !is_basic(j)) {
          enter = j;
          break;
        }
      if (enter == ncols_) return LpStatus::optimal;

      std::size_t leave = nrows_;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < nrows_; ++i) {
        const double a = at(i, enter);
        if (a > kPivotTol) {
          const double ratio = rhs_[i] / a;
          if (ratio < best_ratio - 1e-12 ||
              (ratio < best_ratio + 1e-12 && (leave == nrows_ || basis_[i] < basis_[leave]))) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave == nrows_) return LpStatus::unbounded;
      pivot(leave, enter);
    }
    throw LpNumericError("simplex: iteration limit exceeded");
  }

  void pivot(std::size_t row, std::size_t col) {
    const double piv = at(row, col);
    if (!(std::fabs(piv) > kPivotTol)) throw LpNumericError("simplex: vanishing pivot");
    const double inv = 1.0 / piv;
    for (std::size_t j = 0; j < ncols_; ++j) at(row, j) *= inv;
    rhs_[row] *= inv;
    at(row, col) = 1.0;
    for (std::size_t i = 0; i < nrows_; ++i) {
      if (i == row) continue;
      const double f = at(i, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < ncols_; ++j) at(i, j) -= f * at(row, j);
      at(i, col) = 0.0;
      rhs_[i] -= f * rhs_[row];
      if (!std::isfinite(rhs_[i])) throw LpNumericError("simplex: non-finite tableau");
    }
    const double f = reduced_[col];
    if (f != 0.0) {
      for (std::size_t j = 0; j < ncols_; ++j) reduced_[j] -= f * at(row, j);
      reduced_[col] = 0.0;
    }
    basis_[row] = col;
  }

  // Remove a basic artificial from the basis, or drop its (redundant) row.
  void eliminate_artificials(std::size_t first_artificial) {
    for (std::size_t i = 0; i < nrows_;) {
      if (basis_[i] < first_artificial) {
        ++i;
        continue;
      }
      std::size_t col = ncols_;
      for (std::size_t j = 0; j < first_artificial; ++j)
        if (std::fabs(at(i, j)) > kPivotTol) {
          col = j;
          break;
        }
      if (col < ncols_) {
        pivot(i, col);
        ++i;
      } else {
        drop_row(i);
      }
    }
  }

  double value(std::size_t j) const {
    for (std::size_t i = 0; i < nrows_; ++i)
      if (basis_[i] == j) return rhs_[i];
    return 0.0;
  }
  double objective() const {
    double s = 0.0;
    for (std::size_t i = 0; i < nrows_; ++i) s += costs_[basis_[i]] * rhs_[i];
    return s;
  }
  double reduced_cost(std::size_t j) const { return reduced_[j]; }

 private:
  bool is_basic(std::size_t j) const {
    return std::find(basis_.begin(), basis_.end(), j) != basis_.end();
  }

  void drop_row(std::size_t row) {
    tab_.erase(tab_.begin() + static_cast<std::ptrdiff_t>(row * ncols_),
               tab_.begin() + static_cast<std::ptrdiff_t>((row + 1) * ncols_));
    rhs_.erase(rhs_.begin() + static_cast<std::ptrdiff_t>(row));
    basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(row));
    --nrows_;
  }

  std::size_t ncols_, nrows_;
  std::size_t first_forbidden_ = 0;
  std::vector<double> tab_, rhs_, costs_, reduced_;
  std::vector<std::size_t> basis_;
};

struct CoreResult {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;            // structural variables
  double objective = 0.0;
  std::vector<double> slack_reduced;  // reduced costs of inequality slacks
};

CoreResult solve_core(const LinearProgram& lp) {
  const std::size_t n = lp.num_vars;
  const std::size_t mi = lp.ineq_a.size();
  const std::size_t me = lp.eq_a.size();
  const std::size_t m = mi + me;
  const std::size_t n_slack = mi;

  // Column layout: structural | slacks | artificials (assigned on demand).
  std::vector<std::size_t> artificial_of(m, SIZE_MAX);
  std::size_t n_art = 0;
  std::vector<bool> flipped(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    const double b = i < mi ? lp.ineq_b[i] : lp.eq_b[i - mi];
    if (b < 0.0) flipped[i] = true;
    if (i >= mi || flipped[i]) artificial_of[i] = n_art++;
  }
  const std::size_t total = n + n_slack + n_art;

  SimplexTableau tab(total, m);
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = i < mi ? lp.ineq_a[i] : lp.eq_a[i - mi];
    const double b = i < mi ? lp.ineq_b[i] : lp.eq_b[i - mi];
    const double sign = flipped[i] ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) tab.at(i, j) = sign * row[j];
    if (i < mi) tab.at(i, n + i) = sign;
    tab.rhs(i) = sign * b;
    if (artificial_of[i] != SIZE_MAX) {
      tab.at(i, n + n_slack + artificial_of[i]) = 1.0;
      basis[i] = n + n_slack + artificial_of[i];
    } else {
      basis[i] = n + i;  // unflipped inequality: slack starts basic
    }
  }
  tab.set_basis(basis);

  if (n_art > 0) {
    std::vector<double> phase1(total, 0.0);
    for (std::size_t j = n + n_slack; j < total; ++j) phase1[j] = 1.0;
    tab.set_costs(std::move(phase1));
    tab.forbid_from(total);
    tab.compute_reduced_costs();
    if (tab.iterate() != LpStatus::optimal || tab.objective() > kPhase1Tol)
      return {LpStatus::infeasible, {}, 0.0, {}};
    tab.eliminate_artificials(n + n_slack);
  }

  std::vector<double> costs(total, 0.0);
  for (std::size_t j = 0; j < n; ++j) costs[j] = lp.objective[j];
  tab.set_costs(std::move(costs));
  tab.forbid_from(n + n_slack);  // artificials never re-enter
  tab.compute_reduced_costs();
  const LpStatus status = tab.iterate();
  if (status != LpStatus::optimal) return {status, {}, 0.0, {}};

  CoreResult result;
  result.status = LpStatus::optimal;
  result.x.resize(n);
  for (std::size_t j = 0; j < n; ++j) result.x[j] = tab.value(j);
  result.objective = tab.objective();
  result.slack_reduced.resize(n_slack);
  for (std::size_t i = 0; i < n_slack; ++i) result.slack_reduced[i] = tab.reduced_cost(n + i);
  return result;
}

void check_shapes(const LinearProgram& lp) {
  if (lp.objective.size() != lp.num_vars)
    throw std::invalid_argument("lp: objective length mismatch");
  if (lp.ineq_a.size() != lp.ineq_b.size() || lp.eq_a.size() != lp.eq_b.size())
    throw std::invalid_argument("lp: constraint count mismatch");
  for (const auto& row : lp.ineq_a)
    if (row.size() != lp.num_vars) throw std::invalid_argument("lp: inequality row length");
  for (const auto& row : lp.eq_a)
    if (row.size() != lp.num_vars) throw std::invalid_argument("lp: equality row length");
  const auto finite = [](double v) { return std::isfinite(v); };
  for (double v : lp.objective)
    if (!finite(v)) throw std::invalid_argument("lp: non-finite coefficient");
  for (double v : lp.ineq_b)
    if (!finite(v)) throw std::invalid_argument("lp: non-finite coefficient");
  for (double v : lp.eq_b)
    if (!finite(v)) throw std::invalid_argument("lp: non-finite coefficient");
}

// min b.z s.t. -A^T z <= c, z >= 0: the dual of an inequality-form problem,
// again in inequality form. Optimal primal x_j is the reduced cost of the
// j-th dual slack; objective values are negatives of each other. Returns
// false when the caller should retry with the direct tableau.
bool solve_via_dual(const LinearProgram& lp, LpSolution* out) {
  const std::size_t m = lp.ineq_a.size();
  LinearProgram dual;
  dual.num_vars = m;
  dual.objective = lp.ineq_b;
  dual.ineq_a.assign(lp.num_vars, std::vector<double>(m, 0.0));
  dual.ineq_b = lp.objective;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < lp.num_vars; ++j) dual.ineq_a[j][i] = -lp.ineq_a[i][j];

  const CoreResult res = solve_core(dual);
  if (res.status == LpStatus::unbounded) {
    *out = {LpStatus::infeasible, {}, 0.0};
    return true;
  }
  if (res.status == LpStatus::infeasible) return false;  // primal unbounded or infeasible

  LpSolution sol;
  sol.status = LpStatus::optimal;
  sol.x.assign(res.slack_reduced.begin(), res.slack_reduced.end());
  for (double& v : sol.x) v = std::max(0.0, v);
  sol.objective = -res.objective;

  // Verify the recovered point; retry directly if recovery drifted.
  double obj = 0.0;
  for (std::size_t j = 0; j < lp.num_vars; ++j) obj += lp.objective[j] * sol.x[j];
  if (std::fabs(obj - sol.objective) > 1e-6 * (1.0 + std::fabs(sol.objective))) return false;
  for (std::size_t i = 0; i < m; ++i) {
    double lhs = 0.0;
    for (std::size_t j = 0; j < lp.num_vars; ++j) lhs += lp.ineq_a[i][j] * sol.x[j];
    if (lhs > lp.ineq_b[i] + 1e-6 * (1.0 + std::fabs(lp.ineq_b[i]))) return false;
  }
  *out = std::move(sol);
  return true;
}

}  // namespace

LpSolution solve(const LinearProgram& lp) {
  check_shapes(lp);
  if (lp.eq_a.empty() && lp.ineq_a.size() > std::max<std::size_t>(64, 4 * lp.num_vars)) {
    LpSolution sol;
    if (solve_via_dual(lp, &sol)) return sol;
  }
  const CoreResult res = solve_core(lp);
  return {res.status, res.x, res.objective};
}

}  // namespace ratrial
