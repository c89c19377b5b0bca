#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "causalsafe/causal_q.hpp"
#include "causalsafe/dataset.hpp"
#include "causalsafe/environments.hpp"
#include "causalsafe/offline_tables.hpp"
#include "causalsafe/oracle.hpp"
#include "oracles.hpp"

using namespace causalsafe;

namespace {

// True absorbing online kernel of the toy system from (x, k) under u.
std::vector<double> true_absorbing_row(int x, int u) {
  if (x == 1) return {0.0, 1.0};
  return {oracle::toy_online(0, 0, u), oracle::toy_online(1, 0, u)};
}

const EpisodeDataset& toy_sample() {
  static const EpisodeDataset data = [] {
    const Environment env = build_mediator_toy_env(3);
    return convert_dataset(generate_offline(env, 100000, 0, 7), env.model);
  }();
  return data;
}

double max_gap(const MediatorQTable& a, const MediatorQTable& b) {
  double gap = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    gap = std::max(gap, std::abs(a.data()[i] - b.data()[i]));
  }
  return gap;
}

}  // namespace

TEST_CASE("front-door kernel with exact tables is the online kernel") {
  const Environment env = build_mediator_toy_env(3);
  const OfflineTables tables = exact_offline_tables(env);
  for (int k = 1; k <= 3; ++k) {
    for (int x = 0; x < 2; ++x) {
      for (int u = 0; u < 2; ++u) {
        const auto got = front_door_online_kernel(tables, {x, k}, u);
        const auto want = true_absorbing_row(x, u);
        for (int n = 0; n < 2; ++n) CHECK(std::abs(got[n] - want[n]) < 1e-12);
      }
    }
  }
  // The plain offline row conditions w on the logged u = 1, which only
  // happens under w = 0: 0.8 * 1.0 + 0.2 * 0.9 = 0.98 against 0.63.
  double biased = 0.0, weight = 0.0;
  for (int w = 0; w < 2; ++w) {
    const double pw = oracle::mismatch_latent(0, w) * oracle::mismatch_behavioral(0, w, 1);
    weight += pw;
    for (int m = 0; m < 2; ++m) {
      biased += pw * oracle::toy_mediator(1, m) * oracle::mismatch_stay_zero(0, w, m);
    }
  }
  biased /= weight;
  CHECK(biased == doctest::Approx(0.98));
  CHECK(std::abs(biased - oracle::toy_online(0, 0, 1)) > 0.3);
  CHECK_THROWS_AS(front_door_online_kernel(tables, {0, 0}, 0), EndOfEpisodeError);
}

TEST_CASE("front-door kernel from logged data") {
  const Environment env = build_mediator_toy_env(3);
  const OfflineTables tables = empirical_offline_tables(toy_sample(), 2, 2, 2);
  for (int k = 1; k <= 3; ++k) {
    for (int u = 0; u < 2; ++u) {
      const auto got = front_door_online_kernel(tables, {0, k}, u);
      const auto want = true_absorbing_row(0, u);
      for (int n = 0; n < 2; ++n) CHECK(std::abs(got[n] - want[n]) < 1e-2);
    }
  }
  CHECK(tables.action_count({0, 3}) == 100000);
}

TEST_CASE("front-door kernel with a single logged action") {
  // Only u' = 0 is ever logged, so the kernel is the mediator-weighted
  // next-state row of that action.
  OfflineTables tables(2, 1, 2, 2);
  tables.set_action({0, 1}, std::vector<double>{1.0, 0.0});
  tables.set_mediator({0, 1}, 0, std::vector<double>{0.7, 0.3});
  tables.set_mediator({0, 1}, 1, std::vector<double>{0.1, 0.9});
  tables.set_next({0, 1}, 0, 0, std::vector<double>{0.6, 0.4});
  tables.set_next({0, 1}, 0, 1, std::vector<double>{0.2, 0.8});
  for (int u = 0; u < 2; ++u) {
    const auto pm = tables.mediator({0, 1}, u);
    const auto got = front_door_online_kernel(tables, {0, 1}, u);
    CHECK(got[0] == doctest::Approx(pm[0] * 0.6 + pm[1] * 0.2).epsilon(1e-15));
    CHECK(got[1] == doctest::Approx(pm[0] * 0.4 + pm[1] * 0.8).epsilon(1e-15));
  }
  // A logged action whose next-state cell is missing is a positivity gap.
  tables.set_action({0, 1}, std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(front_door_online_kernel(tables, {0, 1}, 0), PositivityError);
  CHECK_THROWS_AS(front_door_online_kernel(tables, {1, 1}, 0), PositivityError);
}

TEST_CASE("exact fitted Q_M matches dynamic programming") {
  const Environment env = build_mediator_toy_env(3);
  const auto pi = TabularPolicy::uniform(2, 3, 2);
  const FittedQm fit = fitted_qm(env.model, exact_offline_tables(env), pi);
  const MediatorQTable truth = qm_dp(env.model, env.mediator, pi);
  CHECK(fit.iterations <= 4);
  CHECK(max_gap(fit.q, truth) < 1e-10);
  CHECK(fit.unvisited == 0);
  CHECK(fit.warnings.empty());

  const QTable q = q_dp(env.model, pi);
  const QTable rebuilt = q_table_from_qm(fit.q, exact_offline_tables(env), env.model);
  const ValueTable v = value_dp(env.model, pi);
  for (int k = 0; k <= 3; ++k) {
    for (int x = 0; x < 2; ++x) {
      for (int u = 0; u < 2; ++u) CHECK(std::abs(rebuilt({x, k}, u) - q({x, k}, u)) < 1e-10);
      CHECK(std::abs(value_from_qm(fit.q, exact_offline_tables(env), pi, env.model, {x, k}) -
                     v({x, k})) < 1e-10);
    }
  }
}

TEST_CASE("sampled fitted Q_M is close on visited cells") {
  const Environment env = build_mediator_toy_env(3);
  const auto pi = TabularPolicy::uniform(2, 3, 2);
  const FittedQm fit = fitted_qm(env.model, toy_sample(), 2, pi);
  const MediatorQTable truth = qm_dp(env.model, env.mediator, pi);
  const OfflineTables tables = empirical_offline_tables(toy_sample(), 2, 2, 2);
  int compared = 0;
  for (int k = 0; k <= 3; ++k) {
    for (int x = 0; x < 2; ++x) {
      if (!tables.has_action({x, k}) && k > 0) continue;
      for (int u = 0; u < 2; ++u) {
        for (int m = 0; m < 2; ++m) {
          CHECK(std::abs(fit.q({x, k}, u, m) - truth({x, k}, u, m)) < 2e-2);
          ++compared;
        }
      }
    }
  }
  CHECK(compared > 0);
}

TEST_CASE("replicating the data leaves the fit unchanged") {
  const Environment env = build_mediator_toy_env(3);
  const auto pi = TabularPolicy::uniform(2, 3, 2);
  const auto data = convert_dataset(generate_offline(env, 3000, 0, 12), env.model);
  EpisodeDataset doubled = data;
  doubled.episodes.insert(doubled.episodes.end(), data.episodes.begin(),
                          data.episodes.end());
  const FittedQm a = fitted_qm(env.model, data, 2, pi);
  const FittedQm b = fitted_qm(env.model, doubled, 2, pi);
  CHECK(std::equal(a.q.data().begin(), a.q.data().end(), b.q.data().begin()));
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("data that starts unsafe gives zero safety") {
  const Environment env = build_mediator_toy_env(3);
  const auto pi = TabularPolicy::uniform(2, 3, 2);
  const auto data = convert_dataset(generate_offline(env, 500, 1, 3), env.model);
  const FittedQm fit = fitted_qm(env.model, data, 2, pi);
  for (int k = 1; k <= 3; ++k) {
    for (int u = 0; u < 2; ++u) {
      for (int m = 0; m < 2; ++m) CHECK(fit.q({1, k}, u, m) == 0.0);
    }
  }
}

TEST_CASE("fitted Q_M input errors") {
  const Environment env = build_mediator_toy_env(3);
  const auto pi = TabularPolicy::uniform(2, 3, 2);
  const auto raw = generate_offline(env, 10, 0, 1);
  CHECK_THROWS_AS(fitted_qm(env.model, raw, 2, pi), FormError);
  EpisodeDataset empty;
  empty.form = DatasetForm::kConverted;
  empty.horizon = 3;
  CHECK_THROWS_AS(fitted_qm(env.model, empty, 2, pi), PositivityError);

  const Environment mis = build_mismatch_env(3);
  const auto no_mediator = convert_dataset(generate_offline(mis, 10, 0, 1), mis.model);
  CHECK_THROWS_AS(fitted_qm(mis.model, no_mediator, 2, pi), UnsupportedEnvironment);

  // The policy asks for an action that was never logged at a visited state.
  OfflineTables tables(2, 1, 2, 1);
  tables.set_action({0, 1}, std::vector<double>{1.0, 0.0});
  tables.set_mediator({0, 1}, 0, std::vector<double>{1.0});
  tables.set_next({0, 1}, 0, 0, std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(fitted_qm(mis.model.with_horizon(1), tables,
                            TabularPolicy::uniform(2, 1, 2)),
                  PositivityError);

  FittedQmOptions capped;
  capped.max_iters = 1;
  CHECK_THROWS_AS(fitted_qm(env.model, exact_offline_tables(env), pi, capped),
                  ConvergenceError);
}

TEST_CASE("Q_M and Q CSV round trips") {
  const Environment env = build_mediator_toy_env(3);
  const auto pi = TabularPolicy::uniform(2, 3, 2);
  const MediatorQTable qm = qm_dp(env.model, env.mediator, pi);
  std::ostringstream out;
  write_qm_csv(out, qm);
  std::istringstream in(out.str());
  const MediatorQTable back = read_qm_csv(in, 2, 3, 2, 2);
  CHECK(std::equal(qm.data().begin(), qm.data().end(), back.data().begin()));

  const QTable q = q_dp(env.model, pi);
  std::ostringstream qout;
  write_oracle_csv(qout, q);
  std::istringstream qin(qout.str());
  const QTable qback = read_q_csv(qin, 2, 3, 2);
  for (int k = 0; k <= 3; ++k) {
    for (int x = 0; x < 2; ++x) {
      for (int u = 0; u < 2; ++u) CHECK(qback({x, k}, u) == q({x, k}, u));
    }
  }

  std::istringstream bad_header("state,k,value\n0,0,1\n");
  CHECK_THROWS_AS(read_q_csv(bad_header, 2, 3, 2), IoError);
  std::istringstream partial("state,k,action,value\n0,1,0,0.5\n");
  CHECK_THROWS_AS(read_q_csv(partial, 2, 3, 2), IoError);
  std::istringstream out_of_range("state,k,action,value\n5,1,0,0.5\n");
  CHECK_THROWS_AS(read_q_csv(out_of_range, 2, 3, 2), EncodingError);
}
