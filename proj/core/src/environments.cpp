#include "causalsafe/environments.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace causalsafe {
namespace driving {
namespace {

int floor_mod(int a, int n) { return ((a % n) + n) % n; }

int sign(int a) { return (a > 0) - (a < 0); }

void check(DrivingState s) {
  if (s.position < 0 || s.position >= kPositionPeriod || s.velocity < 0 ||
      s.velocity > kMaxVelocity) {
    throw EncodingError("driving state out of range: (" +
                        std::to_string(s.position) + "," +
                        std::to_string(s.velocity) + ")");
  }
}

constexpr std::array<double, 5> kHeavyBrake{0.9, 0.05, 0.03, 0.01, 0.01};
constexpr std::array<double, 5> kBrake{0.5, 0.4, 0.05, 0.04, 0.01};
constexpr std::array<double, 5> kUniform{0.2, 0.2, 0.2, 0.2, 0.2};

}  // namespace

StateId encode(DrivingState s) {
  check(s);
  return s.position * (kMaxVelocity + 1) + s.velocity;
}

DrivingState decode(StateId id) {
  if (id < 0 || id >= kNumStates) {
    throw EncodingError("unknown driving state id " + std::to_string(id));
  }
  return {id / (kMaxVelocity + 1), id % (kMaxVelocity + 1)};
}

bool is_safe(DrivingState s) {
  const bool slow_zone = floor_mod(s.position, 10) < 4;
  return slow_zone ? s.velocity <= 3 : s.velocity <= 5;
}

DrivingState step(DrivingState s, int u, int w, DrivingNoise n) {
  check(s);
  if (std::find(kActions.begin(), kActions.end(), u) == kActions.end()) {
    throw EncodingError("driving action out of range: " + std::to_string(u));
  }
  if (w < 0 || w >= kNumLatent) {
    throw EncodingError("driving latent out of range: " + std::to_string(w));
  }
  if (n.n1 < -1 || n.n1 > 1 || n.n2 < -2 || n.n2 > 2) {
    throw EncodingError("driving noise out of range");
  }
  const int push = u + n.n1;
  const int traction = sign(push) * std::max(0, std::abs(push) - w);
  const int velocity =
      std::min(kMaxVelocity, std::max(0, s.velocity + traction + n.n2));
  return {floor_mod(s.position + s.velocity, kPositionPeriod), velocity};
}

std::array<double, kNumLatent> latent_distribution(DrivingState s) {
  if (floor_mod(s.position, 6) >= 3) return {0.5, 0.5, 0.0, 0.0};
  return {0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
}

std::array<double, kActions.size()> behavioral_policy(DrivingState s, int w) {
  const bool slow_zone = floor_mod(s.position, 10) < 4;
  const int v = s.velocity;
  if (w >= 3 && (slow_zone ? v >= 2 : v >= 4)) return kHeavyBrake;
  if (w >= 2 && (slow_zone ? v >= 1 : v >= 3)) return kBrake;
  if (w >= 1 && (slow_zone ? v >= 2 : v >= 4)) return kBrake;
  return kUniform;
}

}  // namespace driving

// ---------------------------------------------------------------------------

StateId Environment::encode_state(std::span<const int> components) const {
  if (static_cast<int>(components.size()) != state_dims) {
    throw EncodingError(id + ": expected " + std::to_string(state_dims) +
                        " state components");
  }
  if (id == "driving") {
    return driving::encode({components[0], components[1]});
  }
  model.check_state(components[0]);
  return components[0];
}

std::vector<int> Environment::decode_state(StateId x) const {
  model.check_state(x);
  if (id == "driving") {
    const DrivingState s = driving::decode(x);
    return {s.position, s.velocity};
  }
  return {x};
}

Environment Environment::with_horizon(int horizon) const {
  Environment copy = *this;
  copy.model = model.with_horizon(horizon);
  return copy;
}

Environment build_driving_env(int horizon) {
  using namespace driving;
  constexpr int S = kNumStates;
  constexpr int A = static_cast<int>(kActions.size());
  constexpr int W = kNumLatent;

  std::vector<double> transition(static_cast<std::size_t>(S) * A * W * S, 0.0);
  std::vector<double> latent(static_cast<std::size_t>(S) * W, 0.0);
  std::vector<bool> safe(S, false);
  TabularPolicy behavioral = TabularPolicy::latent_aware(S, W, A);

  constexpr double kNoiseMass = 1.0 / kNoiseCombinations;
  for (StateId x = 0; x < S; ++x) {
    const DrivingState s = decode(x);
    safe[x] = is_safe(s);
    const auto pw = latent_distribution(s);
    std::copy(pw.begin(), pw.end(), latent.begin() + x * W);
    for (int w = 0; w < W; ++w) {
      behavioral.set_latent_row(x, w, behavioral_policy(s, w));
      for (int a = 0; a < A; ++a) {
        double* row = transition.data() + ((static_cast<std::size_t>(x) * A + a) * W + w) * S;
        for (int n1 = -1; n1 <= 1; ++n1) {
          for (int n2 = -2; n2 <= 2; ++n2) {
            row[encode(step(s, kActions[a], w, {n1, n2}))] += kNoiseMass;
          }
        }
      }
    }
  }

  ConfoundedMdpModel model(S, {kActions.begin(), kActions.end()}, W, horizon,
                           std::move(transition), std::move(latent),
                           std::move(safe));
  return Environment{"driving", std::move(model), std::move(behavioral),
                     std::nullopt, 2};
}

namespace {

// P(x' = 0 | x, w, u) for the two-state example, indexed [x][w][u]. The
// (x = 1, w = 0) rows are unreachable (P(w = 0 | x = 1) = 0); they are
// filled with the same absorbing behavior as the reachable x = 1 rows.
constexpr double kMismatchStayZero[2][2][2] = {
    {{0.9, 1.0}, {1.0, 0.1}},
    {{0.0, 0.0}, {0.0, 0.0}},
};

std::vector<double> mismatch_latent() { return {0.5, 0.5, 0.0, 1.0}; }

TabularPolicy mismatch_behavioral() {
  TabularPolicy pb = TabularPolicy::latent_aware(2, 2, 2);
  pb.set_latent_row(0, 0, std::vector<double>{0.5, 0.5});
  pb.set_latent_row(0, 1, std::vector<double>{1.0, 0.0});
  // Not specified for the unsafe state; any full-support row works.
  pb.set_latent_row(1, 0, std::vector<double>{0.5, 0.5});
  pb.set_latent_row(1, 1, std::vector<double>{0.5, 0.5});
  return pb;
}

}  // namespace

Environment build_mismatch_env(int horizon) {
  std::vector<double> transition(2 * 2 * 2 * 2);
  for (int x = 0; x < 2; ++x) {
    for (int u = 0; u < 2; ++u) {
      for (int w = 0; w < 2; ++w) {
        const double p0 = kMismatchStayZero[x][w][u];
        double* row = transition.data() + ((x * 2 + u) * 2 + w) * 2;
        row[0] = p0;
        row[1] = 1.0 - p0;
      }
    }
  }
  ConfoundedMdpModel model(2, {0, 1}, 2, horizon, std::move(transition),
                           mismatch_latent(), {true, false});
  return Environment{"mismatch", std::move(model), mismatch_behavioral(),
                     std::nullopt, 1};
}

Environment build_mediator_toy_env(int horizon) {
  constexpr double kKeep = 0.8;
  std::vector<double> mediator_dist(2 * 2 * 2);
  for (int x = 0; x < 2; ++x) {
    for (int u = 0; u < 2; ++u) {
      mediator_dist[(x * 2 + u) * 2 + u] = kKeep;
      mediator_dist[(x * 2 + u) * 2 + (1 - u)] = 1.0 - kKeep;
    }
  }
  // P(x' | x, m, w) is the mismatch kernel with the action replaced by m.
  std::vector<double> mediated(2 * 2 * 2 * 2);
  for (int x = 0; x < 2; ++x) {
    for (int m = 0; m < 2; ++m) {
      for (int w = 0; w < 2; ++w) {
        const double p0 = kMismatchStayZero[x][w][m];
        double* row = mediated.data() + ((x * 2 + m) * 2 + w) * 2;
        row[0] = p0;
        row[1] = 1.0 - p0;
      }
    }
  }
  MediatorModel mediator(2, 2, 2, 2, std::move(mediator_dist),
                         std::move(mediated));
  ConfoundedMdpModel model(2, {0, 1}, 2, horizon,
                           mediator.marginal_transition(), mismatch_latent(),
                           {true, false});
  return Environment{"mediator-toy", std::move(model), mismatch_behavioral(),
                     std::move(mediator), 1};
}

Environment make_environment(std::string_view id, int horizon) {
  if (id == "driving") return build_driving_env(horizon);
  if (id == "mismatch") return build_mismatch_env(horizon);
  if (id == "mediator-toy") return build_mediator_toy_env(horizon);
  throw ConfigError("unknown environment id '" + std::string(id) + "'");
}

}  // namespace causalsafe
