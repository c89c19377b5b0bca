#include "causalsafe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "causalsafe/parallel.hpp"
#include "causalsafe/rng.hpp"
#include "text.hpp"

namespace causalsafe {

const Curve& ExperimentResult::curve(const std::string& metric) const {
  for (const Curve& c : curves) {
    if (c.metric == metric) return c;
  }
  throw ConfigError("result has no '" + metric + "' curve");
}

namespace {

// Per-episode sample layout: kMetrics blocks of H + 1 values.
enum SampleMetric {
  kInstantaneous,
  kCumulative,
  kLongTerm,
  kLongTermMc,
  kLongTermSuffix,
  kMetrics,
};

constexpr const char* kMetricNames[kMetrics] = {
    "instantaneous", "cumulative", "long_term", "long_term_mc",
    "long_term_suffix"};

std::vector<double> sample_episode(const ConfoundedMdpModel& model,
                                   const Controller& controller,
                                   const TabularPolicy& nominal,
                                   const ValueTable& value, StateId x0,
                                   std::uint64_t seed, std::uint64_t batch,
                                   std::uint64_t traj,
                                   std::size_t* violations) {
  const int H = model.horizon();
  const std::size_t T = H + 1;
  std::vector<double> out(kMetrics * T, 0.0);
  const TrajectoryRecord rec = run_control_episode(
      model, controller, nominal, x0, derive_seed(seed, {batch, traj, 0}));
  *violations = rec.feasibility_violations();

  bool prefix = true;
  for (int t = 0; t <= H; ++t) {
    const StateId x = rec.x[t];
    const bool safe = model.safe(x);
    prefix = prefix && safe;
    const double v = value({x, H - t});
    out[kInstantaneous * T + t] = safe ? 1.0 : 0.0;
    out[kCumulative * T + t] = prefix ? 1.0 : 0.0;
    out[kLongTerm * T + t] = prefix ? v : 0.0;
    out[kLongTermSuffix * T + t] = v;

    bool branch_safe = prefix;
    if (branch_safe) {
      Rng rng(derive_seed(seed, {batch, traj, static_cast<std::uint64_t>(t) + 1}));
      StateId cur = x;
      for (int s = t; s < H && branch_safe; ++s) {
        const ActionIndex u = rng.sample(nominal.row({cur, H - s}));
        cur = sample_true_step(model, cur, u, rng);
        branch_safe = model.safe(cur);
      }
    }
    out[kLongTermMc * T + t] = branch_safe ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ConfoundedMdpModel& model,
                                const Controller& controller,
                                const TabularPolicy& nominal,
                                const ValueTable& value,
                                const ExperimentOptions& options) {
  if (options.batches <= 0 || options.trajectories <= 0) {
    throw ConfigError("batches and trajectories must be positive");
  }
  model.check_state(options.x0);
  const int H = model.horizon();
  const std::size_t T = H + 1;
  const std::size_t B = options.batches;
  const std::size_t J = options.trajectories;

  std::vector<std::vector<double>> samples(B * J);
  std::vector<std::size_t> violations(B * J, 0);
  parallel_for(B * J, options.threads, [&](std::size_t i) {
    samples[i] = sample_episode(model, controller, nominal, value, options.x0,
                                options.seed, i / J, i % J, &violations[i]);
  });

  ExperimentResult result;
  result.controller_id = controller.id();
  result.horizon = H;
  result.batches = options.batches;
  result.trajectories = options.trajectories;
  result.seed = options.seed;
  result.x0 = options.x0;
  for (std::size_t v : violations) result.feasibility_violations += v;

  // Fixed summation order: trajectories within a batch, then batches.
  std::vector<double> batch_means(B);
  for (int metric = 0; metric < kMetrics; ++metric) {
    Curve curve{kMetricNames[metric], std::vector<double>(T),
                std::vector<double>(T)};
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t b = 0; b < B; ++b) {
        double sum = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
          sum += samples[b * J + j][metric * T + t];
        }
        batch_means[b] = sum / static_cast<double>(J);
      }
      double mean = 0.0;
      for (double m : batch_means) mean += m;
      mean /= static_cast<double>(B);
      double half = 0.0;
      if (B > 1) {
        double ss = 0.0;
        for (double m : batch_means) ss += (m - mean) * (m - mean);
        half = 1.96 * std::sqrt(ss / static_cast<double>(B - 1)) /
               std::sqrt(static_cast<double>(B));
      }
      curve.mean[t] = mean;
      curve.ci_half[t] = half;
    }
    result.curves.push_back(std::move(curve));
  }
  return result;
}

std::vector<Curve> exact_curves(const ConfoundedMdpModel& model,
                                const Controller& controller,
                                const TabularPolicy& nominal,
                                const ValueTable& value, StateId x0) {
  model.check_state(x0);
  const int H = model.horizon();
  const int S = model.num_states();
  const int A = model.num_actions();
  const ObservedKernel online = online_kernel(model);

  std::vector<Curve> curves;
  for (const char* name : {"exact_long_term", "exact_long_term_suffix",
                           "exact_instantaneous", "exact_cumulative"}) {
    curves.push_back({name, std::vector<double>(H + 1, 0.0),
                      std::vector<double>(H + 1, 0.0)});
  }
  Curve& long_term = curves[0];
  Curve& suffix = curves[1];
  Curve& instantaneous = curves[2];
  Curve& cumulative = curves[3];

  // `absorbed` freezes unsafe states; `raw` keeps applying the controller.
  std::vector<double> absorbed(S, 0.0), raw(S, 0.0);
  absorbed[x0] = raw[x0] = 1.0;
  std::vector<double> next_absorbed(S), next_raw(S);
  for (int t = 0; t <= H; ++t) {
    for (StateId x = 0; x < S; ++x) {
      const double v = value({x, H - t});
      long_term.mean[t] += absorbed[x] * v;
      suffix.mean[t] += raw[x] * v;
      if (model.safe(x)) {
        instantaneous.mean[t] += raw[x];
        cumulative.mean[t] += absorbed[x];
      }
    }
    if (t == H) break;

    std::fill(next_absorbed.begin(), next_absorbed.end(), 0.0);
    std::fill(next_raw.begin(), next_raw.end(), 0.0);
    for (StateId x = 0; x < S; ++x) {
      if (absorbed[x] == 0.0 && raw[x] == 0.0) continue;
      const bool safe = model.safe(x);
      if (!safe) next_absorbed[x] += absorbed[x];
      const std::vector<double> action =
          controller_action_distribution(controller, nominal, H, x, t);
      for (ActionIndex u = 0; u < A; ++u) {
        if (action[u] == 0.0) continue;
        const auto row = online.row(x, u);
        const double a = safe ? absorbed[x] * action[u] : 0.0;
        const double r = raw[x] * action[u];
        for (StateId n = 0; n < S; ++n) {
          if (row[n] == 0.0) continue;
          next_absorbed[n] += a * row[n];
          next_raw[n] += r * row[n];
        }
      }
    }
    absorbed.swap(next_absorbed);
    raw.swap(next_raw);
  }
  return curves;
}

std::vector<double> exact_long_term_curve(const ConfoundedMdpModel& model,
                                          const Controller& controller,
                                          const TabularPolicy& nominal,
                                          const ValueTable& value, StateId x0) {
  return exact_curves(model, controller, nominal, value, x0).front().mean;
}

// ---------------------------------------------------------------------------
// Reports

void write_curves_csv(std::ostream& out,
                      const std::vector<ExperimentResult>& results) {
  out << "t,metric,mean,ci_lo,ci_hi,controller\n";
  for (const ExperimentResult& r : results) {
    for (const Curve& c : r.curves) {
      for (std::size_t t = 0; t < c.mean.size(); ++t) {
        const double half = t < c.ci_half.size() ? c.ci_half[t] : 0.0;
        out << t << ',' << c.metric << ',' << detail::format_double(c.mean[t])
            << ',' << detail::format_double(c.mean[t] - half) << ','
            << detail::format_double(c.mean[t] + half) << ','
            << r.controller_id << '\n';
      }
    }
  }
  if (!out) throw IoError("failed writing curves");
}

std::vector<CurveRow> read_curves_csv(std::istream& in) {
  std::vector<CurveRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty curves file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,metric,mean,ci_lo,ci_hi,controller") {
    throw IoError("unexpected curves header '" + line + "'");
  }
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 6) throw IoError("curves row needs 6 fields");
    rows.push_back({static_cast<int>(detail::parse_int(f[0])),
                    std::string(f[1]), detail::parse_double(f[2]),
                    detail::parse_double(f[3]), detail::parse_double(f[4]),
                    std::string(f[5])});
  }
  return rows;
}

ControllerSummary summarize(const ExperimentResult& result, double threshold) {
  const Curve& exact = result.curve("exact_long_term");
  const Curve& hybrid = result.curve("long_term");
  ControllerSummary s;
  s.controller = result.controller_id;
  s.min_exact_long_term =
      *std::min_element(exact.mean.begin(), exact.mean.end());
  s.min_long_term = *std::min_element(hybrid.mean.begin(), hybrid.mean.end());
  s.exact_meets_threshold = s.min_exact_long_term >= threshold;
  s.mc_within_ci = true;
  for (std::size_t t = 0; t < exact.mean.size(); ++t) {
    if (std::abs(hybrid.mean[t] - exact.mean[t]) > hybrid.ci_half[t] + 1e-12) {
      s.mc_within_ci = false;
    }
  }
  s.feasibility_violations = result.feasibility_violations;
  return s;
}

void write_summary_json(std::ostream& out, const ReportSummary& summary) {
  nlohmann::ordered_json j;
  j["env"] = summary.env_id;
  j["horizon"] = summary.horizon;
  j["epsilon"] = summary.epsilon;
  j["threshold"] = summary.threshold();
  j["x0"] = summary.x0;
  j["batches"] = summary.batches;
  j["trajectories"] = summary.trajectories;
  j["seed"] = summary.seed;
  j["value_x0"] = summary.value_x0;
  j["precondition_met"] = summary.precondition_met;
  auto& controllers = j["controllers"] = nlohmann::ordered_json::array();
  for (const ControllerSummary& c : summary.controllers) {
    nlohmann::ordered_json e;
    e["controller"] = c.controller;
    e["min_exact_long_term"] = c.min_exact_long_term;
    e["min_long_term"] = c.min_long_term;
    e["exact_meets_threshold"] = c.exact_meets_threshold;
    e["mc_within_ci"] = c.mc_within_ci;
    e["feasibility_violations"] = c.feasibility_violations;
    controllers.push_back(std::move(e));
  }
  j["pass"] = summary.pass;
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing summary");
}

void emit_report(const std::filesystem::path& dir,
                 const std::vector<ExperimentResult>& results,
                 const ReportSummary& summary) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "curves.csv", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "curves.csv").string());
    write_curves_csv(out, results);
  }
  std::ofstream out(dir / "summary.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "summary.json").string());
  write_summary_json(out, summary);
}

}  // namespace causalsafe
