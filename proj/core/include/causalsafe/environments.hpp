#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causalsafe/model.hpp"

namespace causalsafe {

/// Vehicle on a one-dimensional road. Position is stored modulo 30, the
/// least common multiple of the speed-limit period (10) and the
/// slipperiness period (6); velocity is capped at 9, which is never reached
/// from a safe state in one step.
struct DrivingState {
  int position = 0;
  int velocity = 0;

  friend bool operator==(const DrivingState&, const DrivingState&) = default;
};

struct DrivingNoise {
  int n1 = 0;  // in {-1, 0, 1}
  int n2 = 0;  // in {-2, ..., 2}
};

namespace driving {

inline constexpr int kPositionPeriod = 30;
inline constexpr int kMaxVelocity = 9;
inline constexpr int kNumStates = kPositionPeriod * (kMaxVelocity + 1);
inline constexpr int kNumLatent = 4;
inline constexpr std::array<int, 5> kActions{-3, -2, -1, 0, 1};

StateId encode(DrivingState s);
DrivingState decode(StateId id);

/// Varying speed limit: 3 where position mod 10 < 4, 5 elsewhere.
bool is_safe(DrivingState s);

/// One step of the road dynamics with explicit latent slipperiness `w` and
/// noise. `u` is the physical acceleration, not an action index.
DrivingState step(DrivingState s, int u, int w, DrivingNoise n);

/// P(w | x): {0,1} uniformly where position mod 6 >= 3, else {1,2,3}.
std::array<double, kNumLatent> latent_distribution(DrivingState s);

/// Logging driver who sees w and brakes harder on slippery road. Where the
/// published rule blocks overlap the most slippery block wins (w >= 3, then
/// w >= 2, then w >= 1, else uniform). Indexed like kActions.
std::array<double, kActions.size()> behavioral_policy(DrivingState s, int w);

/// Number of (x, w, n1, n2) combinations enumerated per kernel row.
inline constexpr int kNoiseCombinations = 3 * 5;

}  // namespace driving

/// A ready-to-use model plus everything needed to log data from it.
struct Environment {
  std::string id;
  ConfoundedMdpModel model;
  TabularPolicy behavioral;
  std::optional<MediatorModel> mediator;
  /// Components of a decoded visible state (2 for driving, 1 otherwise).
  int state_dims = 1;

  StateId encode_state(std::span<const int> components) const;
  std::vector<int> decode_state(StateId x) const;

  Environment with_horizon(int horizon) const;
};

Environment build_driving_env(int horizon = 10);

/// Two visible states (0 safe, 1 unsafe), two actions, two latent values;
/// the offline and online one-step safe probabilities under u = 1 are 1.0
/// and 0.55 respectively.
Environment build_mismatch_env(int horizon = 3);

/// Mismatch environment with a binary mediator: the executed mediator
/// equals the chosen action with probability 0.8, and x' depends on u only
/// through m.
Environment build_mediator_toy_env(int horizon = 3);

/// "driving", "mismatch" or "mediator-toy".
Environment make_environment(std::string_view id, int horizon);

}  // namespace causalsafe
