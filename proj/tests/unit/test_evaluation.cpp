#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "causalsafe/evaluation.hpp"
#include "causalsafe/environments.hpp"

using namespace causalsafe;

namespace {

struct Setup {
  Environment env = build_driving_env(10);
  TabularPolicy pi = TabularPolicy::uniform(300, 10, 5);
  OracleSolution sol = solve_oracle(env.model, pi);
  CertificateController proposed{"proposed", sol.q, pi, CertificateConfig{},
                                 {driving::kActions.begin(), driving::kActions.end()}};
  StateId x0 = driving::encode({0, 0});

  ExperimentResult run(const Controller& c, unsigned threads, std::uint64_t seed = 5) const {
    ExperimentOptions opts;
    opts.batches = 20;
    opts.trajectories = 50;
    opts.x0 = x0;
    opts.seed = seed;
    opts.threads = threads;
    return run_experiment(env.model, c, pi, sol.value, opts);
  }
};

const Setup& setup() {
  static const Setup s;
  return s;
}

}  // namespace

TEST_CASE("Monte Carlo curve structure") {
  const auto& s = setup();
  const ExperimentResult r = s.run(s.proposed, 2);
  CHECK(r.controller_id == "proposed");
  CHECK(r.horizon == 10);
  const Curve& hybrid = r.curve("long_term");
  const Curve& inst = r.curve("instantaneous");
  const Curve& cum = r.curve("cumulative");
  REQUIRE(hybrid.mean.size() == 11);
  CHECK(std::abs(hybrid.mean[0] - s.sol.value({s.x0, 10})) < 1e-12);
  CHECK(hybrid.ci_half[0] < 1e-12);
  CHECK(inst.mean[0] == 1.0);
  for (int t = 1; t <= 10; ++t) {
    CHECK(cum.mean[t] <= cum.mean[t - 1]);
    CHECK(inst.mean[t] >= cum.mean[t]);
  }
  CHECK(std::abs(hybrid.mean[10] - cum.mean[10]) < 1e-12);
  CHECK(r.curve("long_term_mc").mean.size() == 11);
  CHECK(r.curve("long_term_suffix").mean.size() == 11);
  CHECK_THROWS_AS(r.curve("nope"), ConfigError);
  CHECK(r.feasibility_violations == 0);
}

TEST_CASE("results do not depend on the thread count") {
  const auto& s = setup();
  const ExperimentResult a = s.run(s.proposed, 1);
  const ExperimentResult b = s.run(s.proposed, 4);
  REQUIRE(a.curves.size() == b.curves.size());
  for (std::size_t i = 0; i < a.curves.size(); ++i) {
    CHECK(a.curves[i].mean == b.curves[i].mean);
    CHECK(a.curves[i].ci_half == b.curves[i].ci_half);
  }
  const ExperimentResult c = s.run(s.proposed, 1, 6);
  CHECK(a.curve("long_term").mean != c.curve("long_term").mean);
}

TEST_CASE("exact curves") {
  const auto& s = setup();
  const auto curves = exact_curves(s.env.model, s.proposed, s.pi, s.sol.value, s.x0);
  REQUIRE(curves.size() == 4);
  const auto lt = exact_long_term_curve(s.env.model, s.proposed, s.pi, s.sol.value, s.x0);
  ActionDistributionFn dist = [&](StateId x, int t) {
    return controller_action_distribution(s.proposed, s.pi, 10, x, t);
  };
  for (int t = 0; t <= 10; ++t) {
    CHECK(std::abs(lt[t] - mixed_policy_long_term_safety(s.env.model, dist, s.sol.value, t,
                                                         s.x0)) < 1e-12);
    CHECK(curves[0].mean[t] == lt[t]);
    CHECK(curves[0].ci_half[t] == 0.0);
  }
  CHECK(curves[0].metric == "exact_long_term");
  // At t = H the long-term and cumulative curves coincide.
  CHECK(std::abs(curves[0].mean[10] - curves[3].mean[10]) < 1e-12);
  // Acting with the certificate never lowers the long-term probability.
  for (int t = 1; t <= 10; ++t) CHECK(lt[t] >= lt[t - 1] - 1e-12);

  ExperimentResult r = s.run(s.proposed, 0);
  r.curves.insert(r.curves.end(), curves.begin(), curves.end());
  const ControllerSummary sum = summarize(r, 0.8);
  CHECK(sum.controller == "proposed");
  CHECK(sum.min_exact_long_term == doctest::Approx(lt[0]));
  CHECK(sum.exact_meets_threshold == (lt[0] >= 0.8));
}

TEST_CASE("curve CSV") {
  const auto& s = setup();
  std::vector<ExperimentResult> results{s.run(s.proposed, 0)};
  std::ostringstream out;
  write_curves_csv(out, results);
  std::istringstream in(out.str());
  const auto rows = read_curves_csv(in);
  CHECK(rows.size() == results[0].curves.size() * 11);
  CHECK(rows[0].metric == results[0].curves[0].metric);
  CHECK(rows[0].controller == "proposed");
  CHECK(rows[0].t == 0);
  CHECK(rows[0].ci_lo <= rows[0].mean);
  CHECK(rows[0].ci_hi >= rows[0].mean);
  // Written values round-trip exactly.
  const Curve& first = results[0].curves[0];
  for (int t = 0; t <= 10; ++t) CHECK(rows[t].mean == first.mean[t]);

  std::ostringstream empty;
  write_curves_csv(empty, {});
  CHECK(empty.str() == "t,metric,mean,ci_lo,ci_hi,controller\n");
  std::istringstream empty_in(empty.str());
  CHECK(read_curves_csv(empty_in).empty());
  std::istringstream bad("t,metric\n");
  CHECK_THROWS_AS(read_curves_csv(bad), IoError);
}

TEST_CASE("summary JSON field order") {
  ReportSummary summary;
  summary.env_id = "driving";
  summary.horizon = 10;
  summary.epsilon = 0.2;
  summary.controllers.push_back({"proposed", 0.7, 0.7, false, true, 0});
  std::ostringstream out;
  write_summary_json(out, summary);
  const auto j = nlohmann::ordered_json::parse(out.str());
  CHECK(j.begin().key() == "env");
  CHECK(j.at("threshold").get<double>() == doctest::Approx(0.8));
  CHECK(j.at("controllers").size() == 1);
  CHECK(j.at("controllers")[0].at("mc_within_ci") == true);
}

TEST_CASE("invalid experiment options") {
  const auto& s = setup();
  ExperimentOptions opts;
  opts.batches = 0;
  opts.x0 = s.x0;
  CHECK_THROWS_AS(run_experiment(s.env.model, s.proposed, s.pi, s.sol.value, opts),
                  ConfigError);
}
