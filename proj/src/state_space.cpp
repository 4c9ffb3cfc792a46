#include "ratrial/state_space.hpp"

#include <stdexcept>
#include <string>

namespace ratrial {

TrialState successor(const TrialState& x, Arm arm, Outcome outcome) {
  if (!x.valid()) throw std::invalid_argument("successor: invalid state");
  TrialState y = x;
  const int win = outcome == Outcome::success ? 1 : 0;
  if (arm == Arm::control) {
    y.n_c += 1;
    y.s_c += win;
  } else {
    y.n_d += 1;
    y.s_d += win;
  }
  return y;
}

std::size_t stage_size(int t) {
  if (t < 0) throw std::invalid_argument("stage_size: negative stage");
  const auto u = static_cast<std::size_t>(t);
  return (u + 1) * (u + 2) * (u + 3) / 6;
}

std::size_t stage_start(int t) {
  if (t < 0) throw std::invalid_argument("stage_start: negative stage");
  const auto u = static_cast<std::size_t>(t);
  return u * (u + 1) * (u + 2) * (u + 3) / 24;
}

std::size_t StateIndexer::block_offset(int t, int k) {
  // Sum over j = 1..k of j * (t + 2 - j): states with n_c < k at stage t.
  const auto m = static_cast<std::size_t>(k);
  const auto tt = static_cast<std::size_t>(t);
  return (tt + 2) * m * (m + 1) / 2 - m * (m + 1) * (2 * m + 1) / 6;
}

std::size_t StateIndexer::local_index(int t, int n_c, int s_c, int s_d) {
  const int n_d = t - n_c;
  return block_offset(t, n_c) +
         static_cast<std::size_t>(s_c) * static_cast<std::size_t>(n_d + 1) +
         static_cast<std::size_t>(s_d);
}

StateIndexer::StateIndexer(int horizon) : horizon_(horizon) {
  if (horizon < 0) throw std::invalid_argument("StateIndexer: negative horizon");
  starts_.resize(static_cast<std::size_t>(horizon) + 2);
  for (int t = 0; t <= horizon + 1; ++t) starts_[static_cast<std::size_t>(t)] = stage_start(t);
}

std::size_t StateIndexer::index(const TrialState& x) const {
  const int t = x.stage();
  if (!x.valid() || x.n_c < 0 || x.n_d < 0 || t > horizon_)
    throw std::invalid_argument("StateIndexer::index: state outside the space");
  return starts_[static_cast<std::size_t>(t)] + local_index(t, x.n_c, x.s_c, x.s_d);
}

TrialState StateIndexer::unindex(std::size_t flat) const {
  if (flat >= num_states()) throw std::out_of_range("StateIndexer::unindex: index too large");
  int t = 0;
  while (starts_[static_cast<std::size_t>(t) + 1] <= flat) ++t;
  std::size_t local = flat - starts_[static_cast<std::size_t>(t)];
  int n_c = 0;
  while (block_offset(t, n_c + 1) <= local) ++n_c;
  local -= block_offset(t, n_c);
  const int n_d = t - n_c;
  const auto width = static_cast<std::size_t>(n_d + 1);
  TrialState x;
  x.n_c = n_c;
  x.n_d = n_d;
  x.s_c = static_cast<int>(local / width);
  x.s_d = static_cast<int>(local % width);
  return x;
}

}  // namespace ratrial
