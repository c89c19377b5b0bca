#pragma once

// Q-margin safety certificate, the online control loop and the DTCBF
// baseline.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causalsafe/environments.hpp"
#include "causalsafe/model.hpp"
#include "causalsafe/oracle.hpp"
#include "causalsafe/rng.hpp"

namespace causalsafe {

enum class SelectionMode {
  /// argmin |u - u_nominal| over the feasible set.
  kNearestNominal,
  /// Largest feasible action value, ignoring the nominal draw.
  kMaxAction,
};

SelectionMode parse_selection_mode(std::string_view name);
std::string_view to_string(SelectionMode mode);

struct CertificateConfig {
  double epsilon = 0.2;
  /// An action is feasible when S >= -feasibility_slack.
  double feasibility_slack = 1e-12;
  SelectionMode selection_mode = SelectionMode::kMaxAction;

  /// Throws ConfigError unless epsilon is in (0, 1) and the slack is >= 0.
  void validate() const;
};

/// S(x, u, t) = Q(ŷ, u) - sum_u' π(u'|ŷ) Q(ŷ, u') with ŷ = (x, H - t) and H
/// the horizon of `q`. Throws ConfigError for t outside [0, H-1] and
/// CertificateUnavailable when the Q row is missing.
double safety_margin(const QTable& q, const TabularPolicy& pi, StateId x,
                     ActionIndex u, int t);

/// S for every action at (x, t).
std::vector<double> safety_margins(const QTable& q, const TabularPolicy& pi,
                                   StateId x, int t);

struct Decision {
  ActionIndex action = 0;
  /// Certificate margin of the chosen action (DTCBF: constraint slack).
  double margin = 0.0;
  /// False when no action satisfied the constraint and a fallback was used.
  bool feasible = true;
};

/// Certificate-constrained action choice. Nearest-nominal ties go to the
/// larger margin, then the smaller action value. An empty feasible set
/// falls back to argmax_u Q with feasible = false.
Decision safe_action(const QTable& q, const TabularPolicy& pi,
                     const CertificateConfig& config,
                     std::span<const int> action_values, StateId x, int t,
                     ActionIndex u_nominal);

/// A latent-blind online controller. decide() must be pure.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string id() const = 0;
  virtual Decision decide(StateId x, int t, ActionIndex u_nominal) const = 0;
};

class CertificateController final : public Controller {
 public:
  CertificateController(std::string id, QTable q, TabularPolicy pi,
                        CertificateConfig config, std::vector<int> action_values);

  std::string id() const override { return id_; }
  Decision decide(StateId x, int t, ActionIndex u_nominal) const override;

  const QTable& q() const { return q_; }

 private:
  std::string id_;
  QTable q_;
  TabularPolicy pi_;
  CertificateConfig config_;
  std::vector<int> action_values_;
};

struct DtcbfParams {
  double alpha = 0.01;
  double delta = -0.5;
};

/// tanh(4.5 + sum_{n=1,3,5,7} 4/(nπ) sin(-(π/5) n (p + 0.5)) - v) for
/// position p and velocity v (the two state components).
double dtcbf_h(DrivingState s);

/// sum_x' P_off(x'|x,u) h(x') >= alpha h(x) + delta. `h` is indexed by
/// visible state. Throws PositivityError when the offline row is undefined.
bool dtcbf_condition(const ObservedKernel& offline, std::span<const double> h,
                     const DtcbfParams& params, StateId x, ActionIndex u);

/// Constraint slack sum_x' P_off(x'|x,u) h(x') - alpha h(x) - delta.
double dtcbf_slack(const ObservedKernel& offline, std::span<const double> h,
                   const DtcbfParams& params, StateId x, ActionIndex u);

/// Largest action value satisfying the DTCBF condition; the smallest action
/// value when none does. Actions whose offline row is undefined cannot be
/// certified and count as infeasible. Decisions are tabulated once since
/// the condition does not depend on t.
class DtcbfController final : public Controller {
 public:
  DtcbfController(const ObservedKernel& offline, std::vector<double> h,
                  DtcbfParams params, std::vector<int> action_values);

  std::string id() const override { return "dtcbf"; }
  Decision decide(StateId x, int t, ActionIndex u_nominal) const override;

 private:
  std::vector<Decision> table_;
};

/// DTCBF on the driving environment with the exact offline kernel.
/// Throws UnsupportedEnvironment for any other environment.
std::unique_ptr<DtcbfController> make_dtcbf_controller(
    const Environment& env, const DtcbfParams& params = {});

/// Action distribution of `controller` at (x, t) with the nominal draw
/// u_n ~ π_n(.|x, H - t) marginalized out.
std::vector<double> controller_action_distribution(
    const Controller& controller, const TabularPolicy& nominal, int horizon,
    StateId x, int t);

/// One step of the true confounded dynamics: w ~ P(w|x), x' ~ P(x'|x,u,w).
StateId sample_true_step(const ConfoundedMdpModel& model, StateId x,
                         ActionIndex u, Rng& rng);

struct TrajectoryRecord {
  std::vector<StateId> x;  // x_0..x_H
  std::vector<ActionIndex> u_nominal;
  std::vector<ActionIndex> u;
  std::vector<double> margin;
  std::vector<bool> feasible;

  std::size_t feasibility_violations() const;
};

/// Algorithm loop for t = 0..H-1: observe x_t, draw u_n ~ π_n, pick u_t with
/// the controller, step the true dynamics. The raw visible state is
/// recorded even after leaving the safe set. Fully determined by `seed`.
TrajectoryRecord run_control_episode(const ConfoundedMdpModel& model,
                                     const Controller& controller,
                                     const TabularPolicy& nominal, StateId x0,
                                     std::uint64_t seed);

/// One JSON line per step {"episode","t","x","u_nominal","u","S","feasible"}
/// and a closing line {"episode","t":H,"x":x_H}.
void write_trajectory_jsonl(std::ostream& out, const TrajectoryRecord& record,
                            std::size_t episode = 0);

}  // namespace causalsafe
