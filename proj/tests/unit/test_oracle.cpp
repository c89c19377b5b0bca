#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "causalsafe/environments.hpp"
#include "causalsafe/oracle.hpp"
#include "oracles.hpp"

using namespace causalsafe;

namespace {

// Value table of the driving system under the uniform policy, computed on
// the enumerated rows.
std::vector<std::vector<double>> reference_driving_values(int horizon) {
  std::vector<std::vector<double>> v(horizon + 1, std::vector<double>(300, 0.0));
  std::vector<std::vector<std::map<oracle::Car, double>>> rows(300);
  for (int x = 0; x < 300; ++x) {
    const oracle::Car c{x / 10, x % 10};
    v[0][x] = oracle::driving_safe(c) ? 1.0 : 0.0;
    if (!oracle::driving_safe(c)) continue;
    for (int u : driving::kActions) rows[x].push_back(oracle::driving_online(c, u));
  }
  for (int k = 1; k <= horizon; ++k) {
    for (int x = 0; x < 300; ++x) {
      if (rows[x].empty()) continue;
      double total = 0.0;
      for (const auto& row : rows[x]) {
        for (const auto& [next, p] : row) total += 0.2 * p * v[k - 1][next.p * 10 + next.v];
      }
      v[k][x] = total;
    }
  }
  return v;
}

ActionDistributionFn uniform_controller(int num_actions) {
  return [num_actions](StateId, int) {
    return std::vector<double>(num_actions, 1.0 / num_actions);
  };
}

}  // namespace

TEST_CASE("value recursion equals the trajectory sum on the mismatch system") {
  for (int H = 1; H <= 6; ++H) {
    const Environment env = build_mismatch_env(H);
    const auto pi = TabularPolicy::uniform(2, H, 2);
    const ValueTable v = value_dp(env.model, pi);
    for (int k = 0; k <= H; ++k) {
      for (int x = 0; x < 2; ++x) {
        const double brute = brute_force_psi(env.model, pi, x, H - k);
        CHECK(std::abs(v({x, k}) - brute) < 1e-12);
        CHECK(std::abs(v({x, k}) - oracle::psi_uniform(oracle::mismatch_online, x, k)) <
              1e-12);
      }
    }
  }
}

TEST_CASE("driving value matches an independent recursion") {
  const Environment env = build_driving_env(10);
  const auto pi = TabularPolicy::uniform(300, 10, 5);
  const ValueTable v = value_dp(env.model, pi);
  const auto ref = reference_driving_values(10);
  double worst = 0.0;
  for (int k = 0; k <= 10; ++k) {
    for (int x = 0; x < 300; ++x) worst = std::max(worst, std::abs(v({x, k}) - ref[k][x]));
  }
  CHECK(worst < 1e-12);
  CHECK(std::abs(v({driving::encode({0, 0}), 10}) - oracle::kDrivingValueOrigin) < 1e-12);
}

TEST_CASE("brute force agrees on short driving horizons") {
  const Environment env = build_driving_env(2);
  const auto pi = TabularPolicy::uniform(300, 2, 5);
  const ValueTable v = value_dp(env.model, pi);
  for (StateId x : {driving::encode({0, 0}), driving::encode({4, 5}),
                    driving::encode({9, 3}), driving::encode({3, 6})}) {
    CHECK(std::abs(v({x, 2}) - brute_force_psi(env.model, pi, x, 0)) < 1e-12);
  }
  const Environment long_env = build_driving_env(5);
  CHECK_THROWS_AS(brute_force_psi(long_env.model, TabularPolicy::uniform(300, 5, 5), 0, 0),
                  SizeError);
}

TEST_CASE("Q and V are consistent") {
  const Environment env = build_driving_env(10);
  const auto pi = TabularPolicy::uniform(300, 10, 5);
  const OracleSolution sol = solve_oracle(env.model, pi);
  const ObservedKernel on = online_kernel(env.model);
  const QTable q = q_dp(env.model, pi);
  for (StateId x = 0; x < 300; ++x) {
    for (int k = 0; k <= 10; ++k) {
      const AugmentedState y{x, k};
      double mean = 0.0;
      for (int u = 0; u < 5; ++u) {
        const double qv = sol.q(y, u);
        CHECK(qv == q(y, u));
        CHECK(qv >= 0.0);
        CHECK(qv <= 1.0 + 1e-12);  // row sums carry rounding
        mean += 0.2 * qv;
        if (k == 0) {
          CHECK(qv == (env.model.safe(x) ? 1.0 : 0.0));
        } else if (!env.model.safe(x)) {
          CHECK(qv == 0.0);
        } else {
          double expected = 0.0;
          for (const Transition& t : absorbing_kernel(on, env.model, y, u)) {
            expected += t.prob * sol.value(t.next);
          }
          CHECK(std::abs(qv - expected) < 1e-12);
        }
      }
      // The policy average of Q is V.
      CHECK(std::abs(mean - sol.value(y)) < 1e-12);
    }
  }
}

TEST_CASE("mediator Q averages back to Q") {
  const Environment env = build_mediator_toy_env(3);
  const auto pi = TabularPolicy::uniform(2, 3, 2);
  const MediatorQTable qm = qm_dp(env.model, env.mediator, pi);
  const QTable q = q_dp(env.model, pi);
  for (int k = 1; k <= 3; ++k) {
    for (int u = 0; u < 2; ++u) {
      double avg = 0.0;
      for (int m = 0; m < 2; ++m) avg += oracle::toy_mediator(u, m) * qm({0, k}, u, m);
      CHECK(std::abs(avg - q({0, k}, u)) < 1e-12);
      for (int m = 0; m < 2; ++m) CHECK(qm({1, k}, u, m) == 0.0);
    }
  }
  // Q_M ignores u: the action only matters through m.
  for (int m = 0; m < 2; ++m) CHECK(qm({0, 2}, 0, m) == qm({0, 2}, 1, m));
  CHECK_THROWS_AS(qm_dp(build_mismatch_env(3).model, std::nullopt, pi),
                  UnsupportedEnvironment);
}

TEST_CASE("state propagation") {
  const Environment env = build_driving_env(10);
  const auto pi = TabularPolicy::uniform(300, 10, 5);
  const ValueTable v = value_dp(env.model, pi);
  const StateId x0 = driving::encode({0, 0});
  for (int t = 0; t <= 10; ++t) {
    const auto dist = propagate_absorbing(env.model, uniform_controller(5), x0, t);
    CHECK(std::accumulate(dist.begin(), dist.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    // Following the nominal policy throughout never changes the answer.
    CHECK(std::abs(mixed_policy_long_term_safety(env.model, uniform_controller(5), v, t, x0) -
                   v({x0, 10})) < 1e-12);
  }
}

TEST_CASE("oracle CSV layout") {
  const Environment env = build_mismatch_env(2);
  const auto pi = TabularPolicy::uniform(2, 2, 2);
  const OracleSolution sol = solve_oracle(env.model, pi);
  std::ostringstream q_out, v_out;
  write_oracle_csv(q_out, sol.q);
  write_value_csv(v_out, sol.value);
  std::istringstream q_in(q_out.str()), v_in(v_out.str());
  std::string line;
  std::getline(q_in, line);
  CHECK(line == "state,k,action,value");
  int rows = 0;
  while (std::getline(q_in, line)) ++rows;
  CHECK(rows == 2 * 3 * 2);
  std::getline(v_in, line);
  CHECK(line == "state,k,value");
}
