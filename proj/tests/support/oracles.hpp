#pragma once

// Test-side reference computations, written directly from the model
// definitions without going through the library's kernel code.

#include <cmath>
#include <map>
#include <utility>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Mismatch system: P(X'=0 | x, w, u), P(W=0 | x), pi_b(U=0 | x=0, w).

inline double mismatch_stay_zero(int x, int w, int u) {
  if (x == 1) return 0.0;
  static constexpr double table[2][2] = {{0.9, 1.0}, {1.0, 0.1}};  // [w][u]
  return table[w][u];
}

inline double mismatch_latent(int x, int w) {
  const double p0 = x == 0 ? 0.5 : 0.0;
  return w == 0 ? p0 : 1.0 - p0;
}

inline double mismatch_behavioral(int x, int w, int u) {
  if (x != 0) return 0.5;
  const double p0 = w == 0 ? 0.5 : 1.0;
  return u == 0 ? p0 : 1.0 - p0;
}

inline double mismatch_online(int next, int x, int u) {
  double p0 = 0.0;
  for (int w = 0; w < 2; ++w) p0 += mismatch_latent(x, w) * mismatch_stay_zero(x, w, u);
  return next == 0 ? p0 : 1.0 - p0;
}

inline double mismatch_offline(int next, int x, int u) {
  double num = 0.0, den = 0.0;
  for (int w = 0; w < 2; ++w) {
    const double weight = mismatch_latent(x, w) * mismatch_behavioral(x, w, u);
    const double p0 = mismatch_stay_zero(x, w, u);
    num += weight * (next == 0 ? p0 : 1.0 - p0);
    den += weight;
  }
  return num / den;
}

/// Toy mediator system: m = u with probability 0.8, x' depends on m.
inline double toy_mediator(int u, int m) { return m == u ? 0.8 : 0.2; }

inline double toy_online(int next, int x, int u) {
  double p = 0.0;
  for (int m = 0; m < 2; ++m) p += toy_mediator(u, m) * mismatch_online(next, x, m);
  return p;
}

/// Probability that every state from now to the end is 0, under a uniform
/// two-action policy, by recursion over trajectories on `online`.
template <typename Online>
double psi_uniform(Online online, int x, int steps) {
  if (x != 0) return 0.0;
  if (steps == 0) return 1.0;
  double total = 0.0;
  for (int u = 0; u < 2; ++u) {
    for (int next = 0; next < 2; ++next) {
      const double p = 0.5 * online(next, x, u);
      if (p > 0.0) total += p * psi_uniform(online, next, steps - 1);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Driving system written out from its textual description.

struct Car {
  int p;
  int v;
  bool operator<(const Car& o) const { return p != o.p ? p < o.p : v < o.v; }
};

inline bool driving_safe(Car c) {
  const int zone = ((c.p % 10) + 10) % 10;
  return zone < 4 ? c.v <= 3 : c.v <= 5;
}

inline std::vector<std::pair<int, double>> driving_latent(Car c) {
  if (((c.p % 6) + 6) % 6 >= 3) return {{0, 0.5}, {1, 0.5}};
  return {{1, 1.0 / 3}, {2, 1.0 / 3}, {3, 1.0 / 3}};
}

inline Car driving_next(Car c, int u, int w, int n1, int n2) {
  const int a = u + n1;
  const int sign = (a > 0) - (a < 0);
  const int traction = std::max(0, std::abs(a) - w);
  int v = c.v + sign * traction + n2;
  v = std::min(9, std::max(0, v));
  return {(c.p + c.v) % 30, v};
}

/// P(x' | x, u) with the latent and both noises enumerated.
inline std::map<Car, double> driving_online(Car c, int u) {
  std::map<Car, double> row;
  for (auto [w, pw] : driving_latent(c)) {
    for (int n1 = -1; n1 <= 1; ++n1) {
      for (int n2 = -2; n2 <= 2; ++n2) {
        row[driving_next(c, u, w, n1, n2)] += pw / 15.0;
      }
    }
  }
  return row;
}

inline double driving_barrier(Car c) {
  const double pi = std::acos(-1.0);
  double s = 0.0;
  for (int n : {1, 3, 5, 7}) s += 4.0 / (n * pi) * std::sin(-pi / 5.0 * n * (c.p + 0.5));
  return std::tanh(4.5 + s - c.v);
}

// ---------------------------------------------------------------------------
// Frozen reference values.

/// Driving: V((0,0), 10) under the uniform nominal policy.
inline constexpr double kDrivingValueOrigin = 0.7365001461905754;
/// h((0,0)) and its sine series.
inline constexpr double kBarrierOrigin = 0.99759650846839409;
inline constexpr double kBarrierSeriesOrigin = -1.1386112469427845;

}  // namespace oracle
