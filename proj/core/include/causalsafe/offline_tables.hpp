#pragma once

// Conditional tables of the absorbing offline process, keyed by augmented
// state y = (x̂, k):
//   P̃_off(x̂' | y, u, m)   next state (at k - 1)
//   P̃_off(u | y)           logged action
//   P̃_off(m | u, y)        logged mediator
// Environments without a mediator use a single dummy mediator m = 0.
// Cells with no support are absent; reading one throws PositivityError.

#include <span>
#include <vector>

#include "causalsafe/dataset.hpp"
#include "causalsafe/environments.hpp"

namespace causalsafe {

class OfflineTables {
 public:
  OfflineTables(int num_states, int horizon, int num_actions,
                int num_mediators);

  int num_states() const { return num_states_; }
  int horizon() const { return horizon_; }
  int num_actions() const { return num_actions_; }
  int num_mediators() const { return num_mediators_; }

  bool has_next(AugmentedState y, ActionIndex u, MediatorId m) const;
  std::span<const double> next(AugmentedState y, ActionIndex u,
                               MediatorId m) const;
  /// Number of logged transitions behind next(y, u, m); 0 for exact tables.
  double next_count(AugmentedState y, ActionIndex u, MediatorId m) const;

  bool has_action(AugmentedState y) const;
  std::span<const double> action(AugmentedState y) const;
  double action_count(AugmentedState y) const;

  bool has_mediator(AugmentedState y, ActionIndex u) const;
  std::span<const double> mediator(AugmentedState y, ActionIndex u) const;
  double mediator_count(AugmentedState y, ActionIndex u) const;

  void set_next(AugmentedState y, ActionIndex u, MediatorId m,
                std::span<const double> row, double count = 0.0);
  void set_action(AugmentedState y, std::span<const double> row,
                  double count = 0.0);
  void set_mediator(AugmentedState y, ActionIndex u,
                    std::span<const double> row, double count = 0.0);

 private:
  struct Block {
    std::vector<double> values;
    std::vector<bool> present;
    std::vector<double> counts;
    std::size_t width = 0;

    void init(std::size_t cells, std::size_t row_width);
    std::span<const double> row(std::size_t cell) const;
    void set(std::size_t cell, std::span<const double> row, double count);
  };

  std::size_t y_index(AugmentedState y) const;
  std::size_t yu_index(AugmentedState y, ActionIndex u) const;
  std::size_t yum_index(AugmentedState y, ActionIndex u, MediatorId m) const;

  int num_states_;
  int horizon_;
  int num_actions_;
  int num_mediators_;
  Block next_;
  Block action_;
  Block mediator_;
};

/// Count-ratio (maximum likelihood) tables from a converted dataset, over
/// transitions t = 0..H-1. `num_mediators` is ignored when the dataset has
/// no mediator sequences.
OfflineTables empirical_offline_tables(const EpisodeDataset& converted,
                                       int num_states, int num_actions,
                                       int num_mediators);

/// The same tables computed from the ground-truth model for k = 1..H. For
/// unsafe x̂ the next-state row is a point mass and the action/mediator rows
/// use the behavioral law at x̂; any normalized choice leaves the front-door
/// kernel unchanged there.
OfflineTables exact_offline_tables(const Environment& env);

}  // namespace causalsafe
