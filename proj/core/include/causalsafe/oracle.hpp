#pragma once

// Ground-truth long-term safe probabilities by backward dynamic programming
// over the absorbing auxiliary MDP, plus a brute-force trajectory
// enumerator used as an independent check on small models.

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "causalsafe/model.hpp"

namespace causalsafe {

/// V over augmented states (x, k), k in [0, H].
class ValueTable {
 public:
  ValueTable(int num_states, int horizon);

  int num_states() const { return num_states_; }
  int horizon() const { return horizon_; }

  double operator()(AugmentedState y) const { return values_[index(y)]; }
  double& operator()(AugmentedState y) { return values_[index(y)]; }

 private:
  std::size_t index(AugmentedState y) const;

  int num_states_;
  int horizon_;
  std::vector<double> values_;
};

/// Q over (x, k, u). Rows may be missing, e.g. when reconstructed from
/// fitted estimates with incomplete data support.
class QTable {
 public:
  QTable(int num_states, int horizon, int num_actions);

  int num_states() const { return num_states_; }
  int horizon() const { return horizon_; }
  int num_actions() const { return num_actions_; }

  bool has_row(AugmentedState y) const;
  /// Throws CertificateUnavailable when the row is missing.
  std::span<const double> row(AugmentedState y) const;
  double operator()(AugmentedState y, ActionIndex u) const { return row(y)[u]; }
  void set_row(AugmentedState y, std::span<const double> values);

 private:
  std::size_t slot(AugmentedState y) const;

  int num_states_;
  int horizon_;
  int num_actions_;
  std::vector<double> values_;
  std::vector<bool> present_;
};

/// Q_M over (x, k, u, m).
class MediatorQTable {
 public:
  MediatorQTable(int num_states, int horizon, int num_actions,
                 int num_mediators);

  int num_states() const { return num_states_; }
  int horizon() const { return horizon_; }
  int num_actions() const { return num_actions_; }
  int num_mediators() const { return num_mediators_; }

  double operator()(AugmentedState y, ActionIndex u, MediatorId m) const {
    return values_[index(y, u, m)];
  }
  double& operator()(AugmentedState y, ActionIndex u, MediatorId m) {
    return values_[index(y, u, m)];
  }
  std::span<const double> data() const { return values_; }

 private:
  std::size_t index(AugmentedState y, ActionIndex u, MediatorId m) const;

  int num_states_;
  int horizon_;
  int num_actions_;
  int num_mediators_;
  std::vector<double> values_;
};

struct OracleSolution {
  ValueTable value;
  QTable q;
};

/// One backward sweep k = 0..H of
///   V(x,0) = 1{C(x)},  V(x,k) = 1{C(x)} sum_u pi(u|x,k) sum_x' P_on(x'|x,u) V(x',k-1).
/// Unsafe states are lumped into a single absorbing sentinel with value 0.
ValueTable value_dp(const ConfoundedMdpModel& model, const TabularPolicy& pi);

/// Q((x,k),u) = sum_x' absorbing_online(x'|x,u) V(x',k-1) for k >= 1;
/// Q((x,0),u) = 1{C(x)} for every u.
QTable q_dp(const ConfoundedMdpModel& model, const TabularPolicy& pi);

/// Both tables from a single sweep.
OracleSolution solve_oracle(const ConfoundedMdpModel& model,
                            const TabularPolicy& pi);

/// Mediator-conditioned Q:
///   Q_M((x,k),u,m) = sum_x' [sum_w P(w|x) P(x'|x,m,w)] V(x',k-1) + r((x,k)).
/// Throws UnsupportedEnvironment when `mediator` is empty.
MediatorQTable qm_dp(const ConfoundedMdpModel& model,
                     const std::optional<MediatorModel>& mediator,
                     const TabularPolicy& pi);

/// Exhaustive sum over every visible trajectory x_t..x_H of
/// 1{all safe} * prod pi * P_online, using the raw (non-absorbing) online
/// kernel. Throws SizeError if |X|^(H-t) exceeds 1e7.
double brute_force_psi(const ConfoundedMdpModel& model,
                       const TabularPolicy& pi, StateId x, int t);

/// Action distribution of a deployed controller at (x, t).
using ActionDistributionFn =
    std::function<std::vector<double>(StateId x, int t)>;

/// Exact distribution of the absorbing visible state after `t` steps of
/// `controller` from x0. Entry x is P(X̂_t = x).
std::vector<double> propagate_absorbing(const ConfoundedMdpModel& model,
                                        const ActionDistributionFn& controller,
                                        StateId x0, int t);

/// sum_x P(X̂_t = x) V(x, H - t): probability that the episode stays safe
/// when `controller` acts for the first t steps and pi acts afterwards.
double mixed_policy_long_term_safety(const ConfoundedMdpModel& model,
                                     const ActionDistributionFn& controller,
                                     const ValueTable& value, int t,
                                     StateId x0);

/// CSV with header `state,k,action,value`.
void write_oracle_csv(std::ostream& out, const QTable& q);
/// CSV with header `state,k,value`.
void write_value_csv(std::ostream& out, const ValueTable& v);

}  // namespace causalsafe
