#pragma once

// Monte Carlo and exact evaluation of deployed controllers, and the report
// files built from them.
//
// Long-term safety at time t is the probability that the whole episode
// stays safe when the controller acts for steps 0..t-1 and the nominal
// policy acts afterwards. Estimators:
//   long_term        hybrid: mean of 1{x_0..x_t safe} V(x_t, H - t)
//   long_term_mc     branch a nominal rollout from x_t and count safe episodes
//   long_term_suffix mean of V(x_t, H - t) without the prefix indicator
// plus the per-time instantaneous P(C(X_t)) and cumulative
// P(C(X_0), ..., C(X_t)) curves.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "causalsafe/certificate.hpp"
#include "causalsafe/model.hpp"
#include "causalsafe/oracle.hpp"

namespace causalsafe {

struct Curve {
  std::string metric;
  std::vector<double> mean;     // indexed by t = 0..H
  std::vector<double> ci_half;  // 95% half-width, 0 for exact curves
};

struct ExperimentResult {
  std::string env_id;
  std::string controller_id;
  int horizon = 0;
  double epsilon = 0.0;
  int batches = 0;
  int trajectories = 0;
  std::uint64_t seed = 0;
  StateId x0 = 0;
  std::vector<Curve> curves;
  std::size_t feasibility_violations = 0;

  /// Throws ConfigError when the metric is absent.
  const Curve& curve(const std::string& metric) const;
};

struct ExperimentOptions {
  int batches = 100;
  int trajectories = 100;
  StateId x0 = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

/// Rolls batches x trajectories controlled episodes under the true
/// dynamics. Trajectory j of batch b uses derive_seed(seed, {b, j, 0}); its
/// nominal branch from time t uses derive_seed(seed, {b, j, t + 1}). Each
/// curve entry is the mean of the batch means with half-width
/// 1.96 sd(batch means) / sqrt(batches). Output is independent of `threads`.
ExperimentResult run_experiment(const ConfoundedMdpModel& model,
                                const Controller& controller,
                                const TabularPolicy& nominal,
                                const ValueTable& value,
                                const ExperimentOptions& options);

/// Exact counterparts computed by propagating state distributions with the
/// nominal draw marginalized: exact_long_term, exact_long_term_suffix,
/// exact_instantaneous and exact_cumulative.
std::vector<Curve> exact_curves(const ConfoundedMdpModel& model,
                                const Controller& controller,
                                const TabularPolicy& nominal,
                                const ValueTable& value, StateId x0);

/// Exact long-term curve only.
std::vector<double> exact_long_term_curve(const ConfoundedMdpModel& model,
                                          const Controller& controller,
                                          const TabularPolicy& nominal,
                                          const ValueTable& value, StateId x0);

struct CurveRow {
  int t = 0;
  std::string metric;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::string controller;

  friend bool operator==(const CurveRow&, const CurveRow&) = default;
};

/// `t,metric,mean,ci_lo,ci_hi,controller`, one row per (curve, t), in the
/// order of `results` and their curves.
void write_curves_csv(std::ostream& out,
                      const std::vector<ExperimentResult>& results);
std::vector<CurveRow> read_curves_csv(std::istream& in);

struct ControllerSummary {
  std::string controller;
  double min_exact_long_term = 0.0;
  double min_long_term = 0.0;
  bool exact_meets_threshold = false;
  /// Every hybrid estimate within its CI of the exact value.
  bool mc_within_ci = false;
  std::size_t feasibility_violations = 0;
};

struct ReportSummary {
  std::string env_id;
  int horizon = 0;
  double epsilon = 0.0;
  StateId x0 = 0;
  int batches = 0;
  int trajectories = 0;
  std::uint64_t seed = 0;
  /// V(x0, H) under the nominal policy.
  double value_x0 = 0.0;
  /// V(x0, H) > 1 - epsilon.
  bool precondition_met = false;
  bool pass = false;
  std::vector<ControllerSummary> controllers;

  double threshold() const { return 1.0 - epsilon; }
};

/// Fills a ControllerSummary from a result holding both the Monte Carlo and
/// the exact curves.
ControllerSummary summarize(const ExperimentResult& result, double threshold);

/// summary.json with a fixed field order.
void write_summary_json(std::ostream& out, const ReportSummary& summary);

/// Writes curves.csv and summary.json into `dir`, creating it if needed.
void emit_report(const std::filesystem::path& dir,
                 const std::vector<ExperimentResult>& results,
                 const ReportSummary& summary);

}  // namespace causalsafe
