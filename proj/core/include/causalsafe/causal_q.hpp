#pragma once

// Front-door estimation of the mediator-conditioned Q function from
// converted offline data, and reconstruction of V and Q from it.
//
// The regression cells are (ŷ, u, m): the least-squares target for a cell
// is the mean of r(ŷ_t) + V̂(ŷ_{t+1}) over logged steps in that cell, i.e.
// an expectation under the offline law of ŷ' given (ŷ, u, m). Under
// confounding that law still depends on u through the latent, so the
// interventional Q_M is recovered by front-door averaging over the logged
// action:
//   Q_M(ŷ, m) = sum_u' P̃_off(u'|ŷ) Q_cell(ŷ, u', m).
// FittedQm::q stores this adjusted table (it does not depend on u), which is
// what V̂, Q̂ and every consumer use.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "causalsafe/dataset.hpp"
#include "causalsafe/model.hpp"
#include "causalsafe/offline_tables.hpp"
#include "causalsafe/oracle.hpp"

namespace causalsafe {

/// P̃_online(x' | ŷ, u) over x' (at k - 1) from offline tables:
///   sum_m sum_u' P̃_off(x'|u',m,ŷ) P̃_off(u'|ŷ) P̃_off(m|u,ŷ).
/// Zero-weight terms are skipped. Throws PositivityError naming the first
/// required cell that is absent and EndOfEpisodeError when ŷ.k == 0.
std::vector<double> front_door_online_kernel(const OfflineTables& tables,
                                             AugmentedState y, ActionIndex u);

struct FittedQmOptions {
  double tolerance = 1e-10;
  int max_iters = 1000;
};

struct FittedQm {
  /// Front-door adjusted Q_M(ŷ, u, m); identical across u.
  MediatorQTable q;
  /// Raw per-cell regression values Q_cell(ŷ, u, m).
  MediatorQTable cell;
  int iterations = 0;
  /// Sup-norm change of the last sweep.
  double residual = 0.0;
  /// Adjusted entries that needed an unvisited cell (treated as 0).
  std::size_t unvisited = 0;
  std::vector<std::string> warnings;
};

/// Fitted Q iteration on the absorbing offline process described by
/// `tables`. Each sweep evaluates V̂ from the current estimate and refits
/// every cell to the mean of r + V̂(next); k = 0 cells are fixed to r(ŷ) and
/// unsafe ŷ are identically 0. Values are clamped to [0, 1]. Sweeps are
/// Jacobi, so an exact-expectation run converges in H + 1 sweeps.
/// Throws PositivityError when π needs an action never logged at a visited
/// ŷ, and ConvergenceError after max_iters sweeps.
FittedQm fitted_qm(const ConfoundedMdpModel& model, const OfflineTables& tables,
                   const TabularPolicy& pi, const FittedQmOptions& options = {});

/// Tabular least-squares fit on a converted dataset. The per-cell mean of
/// targets is an expectation under the empirical next-state row, so this
/// builds the count tables and delegates; replicating every episode leaves
/// the result bit-identical.
FittedQm fitted_qm(const ConfoundedMdpModel& model,
                   const EpisodeDataset& converted, int num_mediators,
                   const TabularPolicy& pi, const FittedQmOptions& options = {});

/// V̂(ŷ) = sum_u π(u|ŷ) sum_m P̃_off(m|u,ŷ) Q_M(ŷ, u, m); r(ŷ) at k = 0.
double value_from_qm(const MediatorQTable& qm, const OfflineTables& tables,
                     const TabularPolicy& pi, const ConfoundedMdpModel& model,
                     AugmentedState y);

/// Q̂(ŷ, u) = sum_m P̃_off(m|u,ŷ) Q_M(ŷ, u, m). Throws PositivityError when
/// u was never logged at ŷ.
double q_from_qm(const MediatorQTable& qm, const OfflineTables& tables,
                 AugmentedState y, ActionIndex u);

/// Q̂ over every ŷ whose actions are all supported; k = 0 rows are r(ŷ) and
/// unsafe rows are 0. Unsupported rows are left missing.
QTable q_table_from_qm(const MediatorQTable& qm, const OfflineTables& tables,
                       const ConfoundedMdpModel& model);

/// CSV `state,k,action,mediator,value`.
void write_qm_csv(std::ostream& out, const MediatorQTable& qm);
MediatorQTable read_qm_csv(std::istream& in, int num_states, int horizon,
                           int num_actions, int num_mediators);

/// Reads the `state,k,action,value` layout written by write_oracle_csv.
/// Rows listed in the file must be complete.
QTable read_q_csv(std::istream& in, int num_states, int horizon,
                  int num_actions);

}  // namespace causalsafe
