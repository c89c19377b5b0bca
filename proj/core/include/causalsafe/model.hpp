#pragma once

// Confounded MDP domain types and the observed-statistics kernel algebra.
//
// A ConfoundedMdpModel holds the ground truth P(x'|x,u,w), P(w|x), the
// safety predicate and the horizon. Nothing downstream of data generation
// is allowed to read the latent tables directly; controllers and estimators
// only see the marginal (online) or behavior-weighted (offline) kernels
// derived here.

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "causalsafe/types.hpp"

namespace causalsafe {

class ConfoundedMdpModel {
 public:
  /// `transition` is dense, indexed [x][u][w][x']; `latent_dist` is [x][w].
  /// Throws ConfigError on size mismatch or any row not summing to 1.
  ConfoundedMdpModel(int num_states, std::vector<int> action_values,
                     int num_latent, int horizon,
                     std::vector<double> transition,
                     std::vector<double> latent_dist, std::vector<bool> safe);

  int num_states() const { return tables_->num_states; }
  int num_actions() const { return static_cast<int>(tables_->actions.size()); }
  int num_latent() const { return tables_->num_latent; }
  int horizon() const { return horizon_; }

  /// Physical value of an action (e.g. an acceleration), in index order.
  std::span<const int> action_values() const { return tables_->actions; }
  int action_value(ActionIndex u) const;

  bool safe(StateId x) const;
  /// Number of safe visible states.
  int num_safe() const;

  /// P(. | x, u, w) over x'.
  std::span<const double> transition_row(StateId x, ActionIndex u,
                                         LatentId w) const;
  /// P(. | x) over w.
  std::span<const double> latent_row(StateId x) const;

  /// Same dynamics, different episode length. Tables are shared.
  ConfoundedMdpModel with_horizon(int horizon) const;

  void check_state(StateId x) const;
  void check_action(ActionIndex u) const;
  void check_latent(LatentId w) const;

 private:
  struct Tables {
    int num_states = 0;
    int num_latent = 0;
    std::vector<int> actions;
    std::vector<double> transition;
    std::vector<double> latent_dist;
    std::vector<bool> safe;
    int num_safe = 0;
  };

  ConfoundedMdpModel(std::shared_ptr<const Tables> tables, int horizon)
      : tables_(std::move(tables)), horizon_(horizon) {}

  std::shared_ptr<const Tables> tables_;
  int horizon_ = 0;
};

enum class PolicyKind {
  /// Rows indexed by augmented state (x, k); what an online controller sees.
  kLatentBlind,
  /// Rows indexed by (x, w); only the behavioral (logging) policy.
  kLatentAware,
};

/// Tabular stochastic policy. Rows start unset; reading an unset row is a
/// ConfigError so that a partially specified policy is never silently used.
class TabularPolicy {
 public:
  static TabularPolicy latent_blind(int num_states, int horizon,
                                    int num_actions);
  static TabularPolicy latent_aware(int num_states, int num_latent,
                                    int num_actions);
  /// Latent-blind policy putting 1/|U| on every action at every (x, k).
  static TabularPolicy uniform(int num_states, int horizon, int num_actions);

  PolicyKind kind() const { return kind_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  /// Horizon for latent-blind policies, number of latent values otherwise.
  int second_dim() const { return second_dim_; }

  void set_row(AugmentedState y, std::span<const double> probs);
  bool has_row(AugmentedState y) const;
  std::span<const double> row(AugmentedState y) const;
  double prob(AugmentedState y, ActionIndex u) const { return row(y)[u]; }

  void set_latent_row(StateId x, LatentId w, std::span<const double> probs);
  std::span<const double> latent_row(StateId x, LatentId w) const;

 private:
  TabularPolicy(PolicyKind kind, int num_states, int second_dim,
                int num_actions);
  std::size_t offset(StateId x, int j) const;
  void store(std::size_t slot, std::span<const double> probs);

  PolicyKind kind_;
  int num_states_;
  int second_dim_;
  int num_actions_;
  std::vector<double> probs_;
  std::vector<bool> set_;
};

/// Mediator layer for front-door environments: u acts on x' only through m.
class MediatorModel {
 public:
  /// `mediator_dist` is [x][u][m]; `mediated_transition` is [x][m][w][x'].
  MediatorModel(int num_states, int num_actions, int num_latent,
                int num_mediators, std::vector<double> mediator_dist,
                std::vector<double> mediated_transition);

  int num_mediators() const { return num_mediators_; }
  int num_states() const { return num_states_; }

  std::span<const double> mediator_row(StateId x, ActionIndex u) const;
  std::span<const double> mediated_row(StateId x, MediatorId m,
                                       LatentId w) const;

  /// sum_m P(m|x,u) P(x'|x,m,w), laid out like ConfoundedMdpModel's table.
  std::vector<double> marginal_transition() const;

 private:
  int num_states_;
  int num_actions_;
  int num_latent_;
  int num_mediators_;
  std::vector<double> mediator_dist_;
  std::vector<double> mediated_transition_;
};

/// P(x' | x, u) = sum_w P(w|x) P(x'|x,u,w): deployment statistics.
double p_online(const ConfoundedMdpModel& model, StateId next, StateId x,
                ActionIndex u);

/// Behavior-weighted statistics seen in logged data:
///   sum_w P(x'|x,u,w) pi_b(u|x,w) P(w|x) / sum_w pi_b(u|x,w) P(w|x).
/// Throws PositivityError when pi_b never takes u at x.
double p_offline(const ConfoundedMdpModel& model,
                 const TabularPolicy& behavioral, StateId next, StateId x,
                 ActionIndex u);

/// Dense observed kernel P(x'|x,u) with explicitly undefined rows.
class ObservedKernel {
 public:
  ObservedKernel(int num_states, int num_actions, std::vector<double> rows,
                 std::vector<bool> defined);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  bool defined(StateId x, ActionIndex u) const;
  /// Throws PositivityError on an undefined row.
  std::span<const double> row(StateId x, ActionIndex u) const;

 private:
  int num_states_;
  int num_actions_;
  std::vector<double> rows_;
  std::vector<bool> defined_;
};

ObservedKernel online_kernel(const ConfoundedMdpModel& model);
ObservedKernel offline_kernel(const ConfoundedMdpModel& model,
                              const TabularPolicy& behavioral);

struct Transition {
  AugmentedState next;
  double prob = 0.0;
};

/// Kernel of the absorbing auxiliary MDP built on `base`: from a safe x it
/// follows the base row, from an unsafe x it stays put (point mass). k
/// always decrements. Zero-probability successors are omitted.
/// Throws EndOfEpisodeError when y.k == 0.
std::vector<Transition> absorbing_kernel(const ObservedKernel& base,
                                         const ConfoundedMdpModel& model,
                                         AugmentedState y, ActionIndex u);

/// Terminal indicator reward: 1 iff k == 0 and x is safe.
int reward(const ConfoundedMdpModel& model, AugmentedState y);

}  // namespace causalsafe
