#include "ratrial/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "ratrial/special_functions.hpp"

namespace ratrial {

namespace {

constexpr double kTieTol = 1e-12;
constexpr double kProbFlush = 1e-300;  // subnormal guard in forward recursion

// Per-stage view of a RewardSpec with dense pointers rebased to the stage.
struct RunningView {
  struct Term {
    double coeff;
    const PredictiveTables* means;
    const ReweightTables* weight;
  };
  std::vector<Term> terms;
  const double* rho_c = nullptr;
  const double* rho_d = nullptr;
  const double* kappa = nullptr;

  void eval(const StateRef& ref, std::size_t local, double* rc, double* rd, double* kp) const {
    double c = rho_c ? rho_c[local] : 0.0;
    double d = rho_d ? rho_d[local] : 0.0;
    for (const Term& term : terms) {
      const double w = term.weight ? term.coeff * term.weight->weight(ref) : term.coeff;
      c += w * term.means->success_c(ref);
      d += w * term.means->success_d(ref);
    }
    *rc = c;
    *rd = d;
    *kp = kappa ? kappa[local] : 0.0;
  }
};

RunningView make_view(const RewardSpec& spec, std::size_t stage_offset) {
  RunningView view;
  for (const auto& term : spec.mean_terms)
    view.terms.push_back({term.coeff, term.means.get(), term.weight.get()});
  if (!spec.rho_c_dense.empty()) view.rho_c = spec.rho_c_dense.data() + stage_offset;
  if (!spec.rho_d_dense.empty()) view.rho_d = spec.rho_d_dense.data() + stage_offset;
  if (!spec.kappa.empty()) view.kappa = spec.kappa.data() + stage_offset;
  return view;
}

struct Actions {
  double value[3];  // 1-p, 1/2, p
};

// One (n_c = const) block of a backward stage sweep. Blocks write disjoint
// slots of v_cur, so they are the parallel unit.
void backward_block(int t, int n_c, const PredictiveTables& kernel, const RunningView& rewards,
                    const Actions& act, const double* v_next, double* v_cur,
                    std::uint8_t* policy) {
  const int n_d = t - n_c;
  std::size_t out = StateIndexer::block_offset(t, n_c);
  const std::size_t base_c = StateIndexer::block_offset(t + 1, n_c + 1);
  const std::size_t base_d = StateIndexer::block_offset(t + 1, n_c);
  const std::size_t stride_c = static_cast<std::size_t>(n_d) + 1;
  const std::size_t stride_d = static_cast<std::size_t>(n_d) + 2;
  for (int s_c = 0; s_c <= n_c; ++s_c) {
    const std::size_t row_cs = base_c + static_cast<std::size_t>(s_c + 1) * stride_c;
    const std::size_t row_cf = base_c + static_cast<std::size_t>(s_c) * stride_c;
    const std::size_t row_d = base_d + static_cast<std::size_t>(s_c) * stride_d;
    for (int s_d = 0; s_d <= n_d; ++s_d, ++out) {
      const StateRef ref{n_c, s_c, n_d, s_d, tri_index(n_c, s_c), tri_index(n_d, s_d),
                         tri_index(t, s_c + s_d)};
      const double pc = kernel.success_c(ref);
      const double pd = kernel.success_d(ref);
      const double cont_c = pc * v_next[row_cs + s_d] + (1.0 - pc) * v_next[row_cf + s_d];
      const double cont_d = pd * v_next[row_d + s_d + 1] + (1.0 - pd) * v_next[row_d + s_d];
      double rho_c, rho_d, kap;
      rewards.eval(ref, out, &rho_c, &rho_d, &kap);
      const double coef = (rho_c + cont_c) - (rho_d + cont_d);
      const int code = coef > kTieTol ? 2 : (coef < -kTieTol ? 0 : 1);
      v_cur[out] = kap + rho_d + cont_d + act.value[code] * coef;
      if (policy) policy[out] = static_cast<std::uint8_t>(code);
    }
  }
}

// One (n_c = const) block of a forward step from stage t to t+1. Gathers
// from at most four predecessors per successor state; no shared writes.
void forward_block(int t_next, int n_c, const PredictiveTables& kernel, const double* p_prev,
                   const double* pol_prev, double* p_next) {
  const int t = t_next - 1;
  const int n_d = t_next - n_c;
  std::size_t out = StateIndexer::block_offset(t_next, n_c);
  const std::size_t base_c = n_c >= 1 ? StateIndexer::block_offset(t, n_c - 1) : 0;
  const std::size_t base_d = StateIndexer::block_offset(t, n_c);
  const std::size_t stride_c = static_cast<std::size_t>(n_d) + 1;
  const std::size_t stride_d = static_cast<std::size_t>(n_d);
  for (int s_c = 0; s_c <= n_c; ++s_c) {
    for (int s_d = 0; s_d <= n_d; ++s_d, ++out) {
      double acc = 0.0;
      if (n_c >= 1) {
        if (s_c >= 1) {
          const std::size_t j = base_c + static_cast<std::size_t>(s_c - 1) * stride_c + s_d;
          const StateRef pr{n_c - 1, s_c - 1, n_d, s_d, tri_index(n_c - 1, s_c - 1),
                            tri_index(n_d, s_d), tri_index(t, s_c - 1 + s_d)};
          acc += p_prev[j] * pol_prev[j] * kernel.success_c(pr);
        }
        if (s_c <= n_c - 1) {
          const std::size_t j = base_c + static_cast<std::size_t>(s_c) * stride_c + s_d;
          const StateRef pr{n_c - 1, s_c, n_d, s_d, tri_index(n_c - 1, s_c),
                            tri_index(n_d, s_d), tri_index(t, s_c + s_d)};
          acc += p_prev[j] * pol_prev[j] * (1.0 - kernel.success_c(pr));
        }
      }
      if (n_d >= 1) {
        if (s_d >= 1) {
          const std::size_t j = base_d + static_cast<std::size_t>(s_c) * stride_d + (s_d - 1);
          const StateRef pr{n_c, s_c, n_d - 1, s_d - 1, tri_index(n_c, s_c),
                            tri_index(n_d - 1, s_d - 1), tri_index(t, s_c + s_d - 1)};
          acc += p_prev[j] * (1.0 - pol_prev[j]) * kernel.success_d(pr);
        }
        if (s_d <= n_d - 1) {
          const std::size_t j = base_d + static_cast<std::size_t>(s_c) * stride_d + s_d;
          const StateRef pr{n_c, s_c, n_d - 1, s_d, tri_index(n_c, s_c),
                            tri_index(n_d - 1, s_d), tri_index(t, s_c + s_d)};
          acc += p_prev[j] * (1.0 - pol_prev[j]) * (1.0 - kernel.success_d(pr));
        }
      }
      p_next[out] = acc >= kProbFlush ? acc : 0.0;
    }
  }
}

// Per-state expected stage reward contributions, written into contrib.
void reward_block(int t, int n_c, const RunningView& rewards, const double* p_stage,
                  const double* pol_stage, double* contrib) {
  const int n_d = t - n_c;
  std::size_t i = StateIndexer::block_offset(t, n_c);
  for (int s_c = 0; s_c <= n_c; ++s_c) {
    for (int s_d = 0; s_d <= n_d; ++s_d, ++i) {
      const StateRef ref{n_c, s_c, n_d, s_d, tri_index(n_c, s_c), tri_index(n_d, s_d),
                         tri_index(t, s_c + s_d)};
      double rho_c, rho_d, kap;
      rewards.eval(ref, i, &rho_c, &rho_d, &kap);
      const double delta = pol_stage[i];
      contrib[i] = p_stage[i] * (delta * rho_c + (1.0 - delta) * rho_d + kap);
    }
  }
}

template <typename Block>
void run_blocks(int t, Exec exec, Block&& block) {
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int n_c = 0; n_c <= t; ++n_c) block(n_c);
  } else {
    for (int n_c = 0; n_c <= t; ++n_c) block(n_c);
  }
}

}  // namespace

PolicyTable PolicyTable::dense(int horizon, double p, std::vector<double> probs) {
  if (probs.size() != stage_start(horizon))
    throw std::invalid_argument("PolicyTable::dense: wrong number of states");
  PolicyTable table;
  table.horizon_ = horizon;
  table.p_ = p;
  table.coded_ = false;
  table.probs_ = std::move(probs);
  return table;
}

PolicyTable PolicyTable::coded(int horizon, double p, std::vector<std::uint8_t> codes) {
  if (codes.size() != stage_start(horizon))
    throw std::invalid_argument("PolicyTable::coded: wrong number of states");
  PolicyTable table;
  table.horizon_ = horizon;
  table.p_ = p;
  table.coded_ = true;
  table.codes_ = std::move(codes);
  return table;
}

PolicyTable PolicyTable::constant(int horizon, double p, double prob) {
  return dense(horizon, p, std::vector<double>(stage_start(horizon), prob));
}

double PolicyTable::action_value(int code) const {
  switch (code) {
    case 0: return 1.0 - p_;
    case 1: return 0.5;
    default: return p_;
  }
}

void PolicyTable::stage_probs(const StateIndexer& idx, int t, double* out) const {
  const std::size_t offset = idx.stage_offset(t);
  const std::size_t count = stage_size(t);
  if (coded_) {
    const double lut[3] = {1.0 - p_, 0.5, p_};
    for (std::size_t j = 0; j < count; ++j) out[j] = lut[codes_[offset + j]];
  } else {
    std::memcpy(out, probs_.data() + offset, count * sizeof(double));
  }
}

BackwardResult backward_induction(const StateIndexer& idx, const PredictiveTables& kernel,
                                  const RewardSpec& rewards, double p, Exec exec,
                                  bool want_policy) {
  if (p < 0.5 || p > 1.0)
    throw std::invalid_argument("backward_induction: randomization degree outside [1/2, 1]");
  const int n = idx.horizon();
  if (!rewards.terminal.empty() && rewards.terminal.size() != stage_size(n))
    throw std::invalid_argument("backward_induction: terminal reward has wrong length");

  std::vector<double> v_next(stage_size(n), 0.0);
  if (!rewards.terminal.empty())
    std::copy(rewards.terminal.begin(), rewards.terminal.end(), v_next.begin());
  std::vector<double> v_cur(n > 0 ? stage_size(n - 1) : 1);
  std::vector<std::uint8_t> codes(want_policy ? idx.num_nonterminal() : 0);
  const Actions act{{1.0 - p, 0.5, p}};

  for (int t = n - 1; t >= 0; --t) {
    const RunningView view = make_view(rewards, idx.stage_offset(t));
    std::uint8_t* stage_codes = want_policy ? codes.data() + idx.stage_offset(t) : nullptr;
    run_blocks(t, exec, [&](int n_c) {
      backward_block(t, n_c, kernel, view, act, v_next.data(), v_cur.data(), stage_codes);
    });
    std::swap(v_next, v_cur);
  }

  BackwardResult result;
  result.value = v_next[0];
  if (want_policy) result.policy = PolicyTable::coded(n, p, std::move(codes));
  return result;
}

ForwardEvaluation forward_evaluate(const StateIndexer& idx, const PredictiveTables& kernel,
                                   const PolicyTable& policy,
                                   std::span<const RewardSpec* const> rewards,
                                   const ForwardOptions& options, Exec exec) {
  const int n = idx.horizon();
  if (policy.horizon() != n || policy.size() != idx.num_nonterminal())
    throw std::invalid_argument("forward_evaluate: policy does not match the horizon");
  for (const RewardSpec* spec : rewards)
    if (!spec->terminal.empty() && spec->terminal.size() != stage_size(n))
      throw std::invalid_argument("forward_evaluate: terminal reward has wrong length");

  const std::size_t max_stage = stage_size(n);
  std::vector<double> prev(max_stage), next(max_stage), pol(max_stage), contrib(max_stage);
  prev[0] = 1.0;

  ForwardEvaluation out;
  out.totals.assign(rewards.size(), 0.0);
  const double extreme_lo = 1.0 - policy.p();
  const double extreme_hi = policy.p();

  for (int t = 0; t < n; ++t) {
    const std::size_t count = stage_size(t);
    policy.stage_probs(idx, t, pol.data());
    if (options.stage_hook) options.stage_hook(t, std::span<const double>(prev.data(), count));
    if (options.check_support && !out.randomized_on_support) {
      for (std::size_t j = 0; j < count; ++j)
        if (prev[j] > 0.0 && pol[j] != extreme_lo && pol[j] != extreme_hi) {
          out.randomized_on_support = true;
          break;
        }
    }
    for (std::size_t k = 0; k < rewards.size(); ++k) {
      const RewardSpec& spec = *rewards[k];
      if (!spec.has_running()) continue;
      const RunningView view = make_view(spec, idx.stage_offset(t));
      run_blocks(t, exec, [&](int n_c) {
        reward_block(t, n_c, view, prev.data(), pol.data(), contrib.data());
      });
      out.totals[k] += pairwise_sum(contrib.data(), count);
    }
    run_blocks(t + 1, exec, [&](int n_c) {
      forward_block(t + 1, n_c, kernel, prev.data(), pol.data(), next.data());
    });
    std::swap(prev, next);
  }

  const std::size_t terminal_count = stage_size(n);
  if (options.stage_hook)
    options.stage_hook(n, std::span<const double>(prev.data(), terminal_count));
  for (std::size_t k = 0; k < rewards.size(); ++k) {
    const RewardSpec& spec = *rewards[k];
    if (spec.terminal.empty()) continue;
    for (std::size_t j = 0; j < terminal_count; ++j) contrib[j] = prev[j] * spec.terminal[j];
    out.totals[k] += pairwise_sum(contrib.data(), terminal_count);
  }
  if (options.want_terminal) {
    prev.resize(terminal_count);
    out.terminal.stage = n;
    out.terminal.probs = std::move(prev);
  }
  return out;
}

StateDistribution forward_distribution(const StateIndexer& idx, const PredictiveTables& kernel,
                                       const PolicyTable& policy, Exec exec) {
  ForwardOptions options;
  options.want_terminal = true;
  auto eval = forward_evaluate(idx, kernel, policy, {}, options, exec);
  return std::move(eval.terminal);
}

double expected_total(const StateIndexer& idx, const PredictiveTables& kernel,
                      const PolicyTable& policy, const RewardSpec& rewards, Exec exec) {
  const RewardSpec* specs[1] = {&rewards};
  return forward_evaluate(idx, kernel, policy, specs, {}, exec).totals[0];
}

}  // namespace ratrial
