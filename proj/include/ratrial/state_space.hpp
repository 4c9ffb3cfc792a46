#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ratrial {

enum class Arm : std::uint8_t { control = 0, developmental = 1 };
enum class Outcome : std::uint8_t { failure = 0, success = 1 };

/// Success and allocation counts per arm after some number of participants.
/// The stage (participants allocated so far) is always n_c + n_d and is
/// derived, never stored, so the conservation law holds by construction.
struct TrialState {
  int s_c = 0;  ///< successes on control
  int s_d = 0;  ///< successes on developmental
  int n_c = 0;  ///< allocations to control
  int n_d = 0;  ///< allocations to developmental

  int stage() const { return n_c + n_d; }
  int successes() const { return s_c + s_d; }
  bool valid() const { return s_c >= 0 && s_d >= 0 && s_c <= n_c && s_d <= n_d; }

  friend bool operator==(const TrialState&, const TrialState&) = default;
};

/// State after one more participant on `arm` with the given outcome.
/// Exactly one allocation count increases by one.
TrialState successor(const TrialState& x, Arm arm, Outcome outcome);

/// Number of states with exactly t allocations: C(t+3, 3).
std::size_t stage_size(int t);

/// Flat index of the first stage-t state: C(t+3, 4).
std::size_t stage_start(int t);

/// Triangular index over (n, s) pairs with 0 <= s <= n.
constexpr std::size_t tri_index(int n, int s) {
  return static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1) / 2 +
         static_cast<std::size_t>(s);
}

/// Flat bijection between trial states and {0, ..., C(n+4,4)-1}.
///
/// Stage blocks are contiguous and ordered by stage; within a stage the
/// order is lexicographic in (n_c, s_c, s_d), all ascending. A stage sweep
/// is then one pass over a contiguous range, which lets value and
/// probability arrays live per stage and be overwritten in place.
class StateIndexer {
 public:
  explicit StateIndexer(int horizon);

  int horizon() const { return horizon_; }
  std::size_t num_states() const { return starts_[horizon_ + 1]; }
  std::size_t num_nonterminal() const { return starts_[horizon_]; }
  std::size_t num_terminal() const { return num_states() - num_nonterminal(); }

  std::size_t index(const TrialState& x) const;
  TrialState unindex(std::size_t flat) const;

  std::size_t stage_offset(int t) const { return starts_[static_cast<std::size_t>(t)]; }

  /// Offset of the (n_c = k) block within stage t.
  static std::size_t block_offset(int t, int k);
  /// Stage-local index of (n_c, s_c, s_d) within stage t.
  static std::size_t local_index(int t, int n_c, int s_c, int s_d);

 private:
  int horizon_;
  std::vector<std::size_t> starts_;  // stage_start(t), t = 0..horizon+1
};

}  // namespace ratrial
