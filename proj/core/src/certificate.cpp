#include "causalsafe/certificate.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include <json.hpp>

namespace causalsafe {

SelectionMode parse_selection_mode(std::string_view name) {
  if (name == "max-action") return SelectionMode::kMaxAction;
  if (name == "nearest-nominal") return SelectionMode::kNearestNominal;
  throw ConfigError("unknown selection mode '" + std::string(name) + "'");
}

std::string_view to_string(SelectionMode mode) {
  return mode == SelectionMode::kMaxAction ? "max-action" : "nearest-nominal";
}

void CertificateConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("epsilon must lie in (0, 1)");
  }
  if (!(feasibility_slack >= 0.0)) {
    throw ConfigError("feasibility slack must be nonnegative");
  }
}

// ---------------------------------------------------------------------------
// Certificate

std::vector<double> safety_margins(const QTable& q, const TabularPolicy& pi,
                                   StateId x, int t) {
  const int H = q.horizon();
  if (t < 0 || t >= H) {
    throw ConfigError("certificate time index must lie in [0, H-1]");
  }
  const AugmentedState y{x, H - t};
  const auto row = q.row(y);
  const auto probs = pi.row(y);
  double mean = 0.0;
  for (std::size_t u = 0; u < row.size(); ++u) mean += probs[u] * row[u];
  std::vector<double> out(row.size());
  for (std::size_t u = 0; u < row.size(); ++u) out[u] = row[u] - mean;
  return out;
}

double safety_margin(const QTable& q, const TabularPolicy& pi, StateId x,
                     ActionIndex u, int t) {
  if (u < 0 || u >= q.num_actions()) {
    throw EncodingError("unknown action " + std::to_string(u));
  }
  return safety_margins(q, pi, x, t)[u];
}

Decision safe_action(const QTable& q, const TabularPolicy& pi,
                     const CertificateConfig& config,
                     std::span<const int> action_values, StateId x, int t,
                     ActionIndex u_nominal) {
  const std::vector<double> s = safety_margins(q, pi, x, t);
  const int A = static_cast<int>(s.size());
  if (static_cast<int>(action_values.size()) != A) {
    throw ConfigError("action value list does not match the Q table");
  }
  if (u_nominal < 0 || u_nominal >= A) {
    throw EncodingError("unknown nominal action " + std::to_string(u_nominal));
  }

  int best = -1;
  auto better = [&](int a, int b) {
    if (config.selection_mode == SelectionMode::kMaxAction) {
      return action_values[a] > action_values[b];
    }
    const int da = std::abs(action_values[a] - action_values[u_nominal]);
    const int db = std::abs(action_values[b] - action_values[u_nominal]);
    if (da != db) return da < db;
    if (s[a] != s[b]) return s[a] > s[b];
    return action_values[a] < action_values[b];
  };
  for (int u = 0; u < A; ++u) {
    if (s[u] < -config.feasibility_slack) continue;
    if (best < 0 || better(u, best)) best = u;
  }
  if (best >= 0) return {best, s[best], true};

  int argmax = 0;
  for (int u = 1; u < A; ++u) {
    if (s[u] > s[argmax]) argmax = u;
  }
  return {argmax, s[argmax], false};
}

CertificateController::CertificateController(std::string id, QTable q,
                                             TabularPolicy pi,
                                             CertificateConfig config,
                                             std::vector<int> action_values)
    : id_(std::move(id)),
      q_(std::move(q)),
      pi_(std::move(pi)),
      config_(config),
      action_values_(std::move(action_values)) {
  config_.validate();
}

Decision CertificateController::decide(StateId x, int t,
                                       ActionIndex u_nominal) const {
  return safe_action(q_, pi_, config_, action_values_, x, t, u_nominal);
}

// ---------------------------------------------------------------------------
// DTCBF

double dtcbf_h(DrivingState s) {
  double series = 0.0;
  for (int n = 1; n <= 7; n += 2) {
    series += 4.0 / (n * std::numbers::pi) *
              std::sin(-(std::numbers::pi / 5.0) * n * (s.position + 0.5));
  }
  return std::tanh(4.5 + series - s.velocity);
}

double dtcbf_slack(const ObservedKernel& offline, std::span<const double> h,
                   const DtcbfParams& params, StateId x, ActionIndex u) {
  const auto row = offline.row(x, u);
  double expected = 0.0;
  for (std::size_t n = 0; n < row.size(); ++n) {
    if (row[n] != 0.0) expected += row[n] * h[n];
  }
  return expected - (params.alpha * h[x] + params.delta);
}

bool dtcbf_condition(const ObservedKernel& offline, std::span<const double> h,
                     const DtcbfParams& params, StateId x, ActionIndex u) {
  return dtcbf_slack(offline, h, params, x, u) >= 0.0;
}

DtcbfController::DtcbfController(const ObservedKernel& offline,
                                 std::vector<double> h, DtcbfParams params,
                                 std::vector<int> action_values) {
  const int S = offline.num_states();
  const int A = offline.num_actions();
  if (static_cast<int>(h.size()) != S ||
      static_cast<int>(action_values.size()) != A) {
    throw ConfigError("DTCBF barrier or action list has the wrong size");
  }
  table_.resize(S);
  for (StateId x = 0; x < S; ++x) {
    int best = -1;
    int lowest = 0;
    double best_slack = 0.0;
    for (ActionIndex u = 0; u < A; ++u) {
      if (action_values[u] < action_values[lowest]) lowest = u;
      if (!offline.defined(x, u)) continue;
      const double slack = dtcbf_slack(offline, h, params, x, u);
      if (slack < 0.0) continue;
      if (best < 0 || action_values[u] > action_values[best]) {
        best = u;
        best_slack = slack;
      }
    }
    if (best >= 0) {
      table_[x] = {best, best_slack, true};
    } else {
      const double slack = offline.defined(x, lowest)
                               ? dtcbf_slack(offline, h, params, x, lowest)
                               : 0.0;
      table_[x] = {lowest, slack, false};
    }
  }
}

Decision DtcbfController::decide(StateId x, int, ActionIndex) const {
  if (x < 0 || x >= static_cast<StateId>(table_.size())) {
    throw EncodingError("unknown state " + std::to_string(x));
  }
  return table_[x];
}

std::unique_ptr<DtcbfController> make_dtcbf_controller(
    const Environment& env, const DtcbfParams& params) {
  if (env.id != "driving") {
    throw UnsupportedEnvironment("the DTCBF baseline is defined for the "
                                 "driving environment only");
  }
  std::vector<double> h(env.model.num_states());
  for (StateId x = 0; x < env.model.num_states(); ++x) {
    h[x] = dtcbf_h(driving::decode(x));
  }
  const auto values = env.model.action_values();
  return std::make_unique<DtcbfController>(
      offline_kernel(env.model, env.behavioral), std::move(h), params,
      std::vector<int>(values.begin(), values.end()));
}

// ---------------------------------------------------------------------------
// Control loop

std::vector<double> controller_action_distribution(
    const Controller& controller, const TabularPolicy& nominal, int horizon,
    StateId x, int t) {
  const auto probs = nominal.row({x, horizon - t});
  std::vector<double> out(probs.size(), 0.0);
  for (std::size_t un = 0; un < probs.size(); ++un) {
    if (probs[un] == 0.0) continue;
    out[controller.decide(x, t, static_cast<ActionIndex>(un)).action] +=
        probs[un];
  }
  return out;
}

StateId sample_true_step(const ConfoundedMdpModel& model, StateId x,
                         ActionIndex u, Rng& rng) {
  const LatentId w = rng.sample(model.latent_row(x));
  return rng.sample(model.transition_row(x, u, w));
}

std::size_t TrajectoryRecord::feasibility_violations() const {
  std::size_t n = 0;
  for (bool f : feasible) n += f ? 0 : 1;
  return n;
}

TrajectoryRecord run_control_episode(const ConfoundedMdpModel& model,
                                     const Controller& controller,
                                     const TabularPolicy& nominal, StateId x0,
                                     std::uint64_t seed) {
  model.check_state(x0);
  const int H = model.horizon();
  Rng rng(seed);
  TrajectoryRecord rec;
  rec.x.reserve(H + 1);
  rec.x.push_back(x0);
  StateId x = x0;
  for (int t = 0; t < H; ++t) {
    const ActionIndex un = rng.sample(nominal.row({x, H - t}));
    const Decision d = controller.decide(x, t, un);
    rec.u_nominal.push_back(un);
    rec.u.push_back(d.action);
    rec.margin.push_back(d.margin);
    rec.feasible.push_back(d.feasible);
    x = sample_true_step(model, x, d.action, rng);
    rec.x.push_back(x);
  }
  return rec;
}

void write_trajectory_jsonl(std::ostream& out, const TrajectoryRecord& record,
                            std::size_t episode) {
  for (std::size_t t = 0; t < record.u.size(); ++t) {
    nlohmann::ordered_json line;
    line["episode"] = episode;
    line["t"] = t;
    line["x"] = record.x[t];
    line["u_nominal"] = record.u_nominal[t];
    line["u"] = record.u[t];
    line["S"] = record.margin[t];
    line["feasible"] = static_cast<bool>(record.feasible[t]);
    out << line.dump() << '\n';
  }
  nlohmann::ordered_json last;
  last["episode"] = episode;
  last["t"] = record.u.size();
  last["x"] = record.x.back();
  out << last.dump() << '\n';
  if (!out) throw IoError("failed writing trajectory");
}

}  // namespace causalsafe
