#include "ratrial/terminal_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ratrial/special_functions.hpp"

namespace ratrial {

namespace {

constexpr double kTieRelTol = 1e-9;

std::vector<double> log_factorials(int n) {
  std::vector<double> lf(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 2; k <= n; ++k) lf[static_cast<std::size_t>(k)] = lf[static_cast<std::size_t>(k) - 1] + std::log(static_cast<double>(k));
  return lf;
}

double log_choose(const std::vector<double>& lf, int n, int k) {
  return lf[static_cast<std::size_t>(n)] - lf[static_cast<std::size_t>(k)] - lf[static_cast<std::size_t>(n - k)];
}

// Hypergeometric probabilities of all tables sharing margins (n_c, n_d, s),
// indexed by s_c - s_c_min.
std::vector<double> margin_probs(const std::vector<double>& lf, int n_c, int n_d, int s,
                                 int* s_c_min) {
  const int n = n_c + n_d;
  const int lo = std::max(0, s - n_d);
  const int hi = std::min(n_c, s);
  *s_c_min = lo;
  std::vector<double> probs(static_cast<std::size_t>(hi - lo) + 1);
  for (int sc = lo; sc <= hi; ++sc)
    probs[static_cast<std::size_t>(sc - lo)] =
        std::exp(log_choose(lf, n_c, sc) + log_choose(lf, n_d, s - sc) - log_choose(lf, n, s));
  return probs;
}

double pvalue_from_probs(const std::vector<double>& probs, int offset) {
  const double threshold = probs[static_cast<std::size_t>(offset)] * (1.0 + kTieRelTol);
  double total = 0.0;
  for (const double p : probs)
    if (p <= threshold) total += p;
  return std::min(total, 1.0);
}

}  // namespace

double fisher_pvalue(const TrialState& x) {
  if (!x.valid()) throw std::invalid_argument("fisher_pvalue: invalid state");
  const auto lf = log_factorials(x.stage());
  int lo = 0;
  const auto probs = margin_probs(lf, x.n_c, x.n_d, x.successes(), &lo);
  return pvalue_from_probs(probs, x.s_c - lo);
}

bool reject(const TrialState& x, double alpha) { return fisher_pvalue(x) <= alpha; }

double effect_estimate(const TrialState& x) {
  if (!x.valid()) throw std::invalid_argument("effect_estimate: invalid state");
  if (std::min(x.n_c, x.n_d) > 0)
    return static_cast<double>(x.s_d) / x.n_d - static_cast<double>(x.s_c) / x.n_c;
  return (x.s_d + 1.0) / (x.n_d + 2.0) - (x.s_c + 1.0) / (x.n_c + 2.0);
}

double posterior_mse_terminal(const TrialState& x, const Rectangle& rect,
                              const IndependentBeta& prior) {
  if (!rect.valid()) throw std::invalid_argument("posterior_mse_terminal: degenerate rectangle");
  const double ac = prior.s_c + x.s_c, bc = prior.f_c + x.n_c - x.s_c;
  const double ad = prior.s_d + x.s_d, bd = prior.f_d + x.n_d - x.s_d;
  const double m1c = truncated_beta_moment(ac, bc, rect.c_lo, rect.c_hi, 1);
  const double m2c = truncated_beta_moment(ac, bc, rect.c_lo, rect.c_hi, 2);
  const double m1d = truncated_beta_moment(ad, bd, rect.d_lo, rect.d_hi, 1);
  const double m2d = truncated_beta_moment(ad, bd, rect.d_lo, rect.d_hi, 2);
  const double var = std::max(0.0, m2c - m1c * m1c) + std::max(0.0, m2d - m1d * m1d);
  const double gap = effect_estimate(x) - (m1d - m1c);
  return gap * gap + var;
}

namespace {

// Fills p-values and estimates for the whole margin (n_c, s); all states
// touched here are disjoint from other margins, so margins parallelize.
void fill_margin(int n, int n_c, int s, const std::vector<double>& lf, TerminalTable& out) {
  const int n_d = n - n_c;
  int lo = 0;
  auto probs = margin_probs(lf, n_c, n_d, s, &lo);
  // Sorted prefix sums turn each p-value into one binary search.
  std::vector<double> sorted(probs);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> prefix(sorted.size());
  std::partial_sum(sorted.begin(), sorted.end(), prefix.begin());
  for (int sc = lo; sc <= std::min(n_c, s); ++sc) {
    const int sd = s - sc;
    const double p = probs[static_cast<std::size_t>(sc - lo)];
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), p * (1.0 + kTieRelTol));
    const auto count = static_cast<std::size_t>(it - sorted.begin());
    const double pval = count == 0 ? 0.0 : std::min(prefix[count - 1], 1.0);
    const std::size_t local = StateIndexer::local_index(n, n_c, sc, sd);
    out.pvalues[local] = pval;
    const TrialState x{sc, sd, n_c, n_d};
    out.estimates[local] = effect_estimate(x);
  }
}

}  // namespace

TerminalTable build_terminal_table(int horizon, Exec exec) {
  if (horizon < 0) throw std::invalid_argument("build_terminal_table: negative horizon");
  TerminalTable table;
  table.horizon = horizon;
  table.pvalues.assign(stage_size(horizon), 0.0);
  table.estimates.assign(stage_size(horizon), 0.0);
  const auto lf = log_factorials(horizon);
  if (exec == Exec::serial) {
    for (int n_c = 0; n_c <= horizon; ++n_c)
      for (int s = 0; s <= horizon; ++s) {
        if (std::max(0, s - (horizon - n_c)) > std::min(n_c, s)) continue;
        fill_margin(horizon, n_c, s, lf, table);
      }
  } else {
#pragma omp parallel for schedule(static)
    for (int n_c = 0; n_c <= horizon; ++n_c)
      for (int s = 0; s <= horizon; ++s) {
        if (std::max(0, s - (horizon - n_c)) > std::min(n_c, s)) continue;
        fill_margin(horizon, n_c, s, lf, table);
      }
  }
  return table;
}

std::vector<double> build_mse_terminal(int horizon, const Rectangle& rect,
                                       const IndependentBeta& prior, Exec exec) {
  if (!rect.valid()) throw std::invalid_argument("build_mse_terminal: degenerate rectangle");
  // Per-arm truncated posterior moments depend only on (n_a, s_a).
  const std::size_t tri_len = tri_index(horizon, horizon) + 1;
  std::vector<double> mean_c(tri_len), var_c(tri_len), mean_d(tri_len), var_d(tri_len);
  const auto fill_moments = [&](std::vector<double>& mean, std::vector<double>& var, double s0,
                                double f0, double lo, double hi) {
    for (int na = 0; na <= horizon; ++na)
      for (int sa = 0; sa <= na; ++sa) {
        const double a = s0 + sa, b = f0 + na - sa;
        const double m1 = truncated_beta_moment_or_midpoint(a, b, lo, hi, 1);
        const double m2 = truncated_beta_moment_or_midpoint(a, b, lo, hi, 2);
        mean[tri_index(na, sa)] = m1;
        var[tri_index(na, sa)] = std::max(0.0, m2 - m1 * m1);
      }
  };
  fill_moments(mean_c, var_c, prior.s_c, prior.f_c, rect.c_lo, rect.c_hi);
  fill_moments(mean_d, var_d, prior.s_d, prior.f_d, rect.d_lo, rect.d_hi);

  std::vector<double> out(stage_size(horizon));
  const auto fill_block = [&](int n_c) {
    const int n_d = horizon - n_c;
    for (int sc = 0; sc <= n_c; ++sc)
      for (int sd = 0; sd <= n_d; ++sd) {
        const TrialState x{sc, sd, n_c, n_d};
        const double m = mean_d[tri_index(n_d, sd)] - mean_c[tri_index(n_c, sc)];
        const double v = var_c[tri_index(n_c, sc)] + var_d[tri_index(n_d, sd)];
        const double gap = effect_estimate(x) - m;
        out[StateIndexer::local_index(horizon, n_c, sc, sd)] = gap * gap + v;
      }
  };
  if (exec == Exec::serial) {
    for (int n_c = 0; n_c <= horizon; ++n_c) fill_block(n_c);
  } else {
#pragma omp parallel for schedule(static)
    for (int n_c = 0; n_c <= horizon; ++n_c) fill_block(n_c);
  }
  return out;
}

namespace {
constexpr char kTerminalMagic[8] = {'R', 'A', 'T', 'R', 'L', 'T', 'R', 'M'};
constexpr std::uint32_t kTerminalVersion = 1;
}  // namespace

void save_terminal_table(const TerminalTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_terminal_table: cannot open " + path);
  out.write(kTerminalMagic, sizeof(kTerminalMagic));
  const std::uint32_t version = kTerminalVersion;
  const auto n = static_cast<std::uint32_t>(table.horizon);
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(table.pvalues.data()),
            static_cast<std::streamsize>(table.pvalues.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(table.estimates.data()),
            static_cast<std::streamsize>(table.estimates.size() * sizeof(double)));
  if (!out) throw std::runtime_error("save_terminal_table: write failed for " + path);
}

TerminalTable load_terminal_table(const std::string& path, int expected_horizon) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_terminal_table: cannot open " + path);
  char magic[8];
  std::uint32_t version = 0, n = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || std::memcmp(magic, kTerminalMagic, sizeof(magic)) != 0 || version != kTerminalVersion)
    throw std::runtime_error("load_terminal_table: bad header in " + path);
  if (static_cast<int>(n) != expected_horizon)
    throw std::runtime_error("load_terminal_table: horizon mismatch in " + path);
  TerminalTable table;
  table.horizon = static_cast<int>(n);
  const std::size_t count = stage_size(table.horizon);
  table.pvalues.resize(count);
  table.estimates.resize(count);
  in.read(reinterpret_cast<char*>(table.pvalues.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  in.read(reinterpret_cast<char*>(table.estimates.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("load_terminal_table: truncated file " + path);
  return table;
}

}  // namespace ratrial
