#include "causalsafe/offline_tables.hpp"

#include <string>

namespace causalsafe {
namespace {

std::string describe(AugmentedState y) {
  return "(x=" + std::to_string(y.x) + ", k=" + std::to_string(y.k) + ")";
}

}  // namespace

void OfflineTables::Block::init(std::size_t cells, std::size_t row_width) {
  width = row_width;
  values.assign(cells * row_width, 0.0);
  present.assign(cells, false);
  counts.assign(cells, 0.0);
}

std::span<const double> OfflineTables::Block::row(std::size_t cell) const {
  return {values.data() + cell * width, width};
}

void OfflineTables::Block::set(std::size_t cell, std::span<const double> row,
                               double count) {
  if (row.size() != width) throw ConfigError("offline table row has wrong width");
  std::copy(row.begin(), row.end(), values.begin() + cell * width);
  present[cell] = true;
  counts[cell] = count;
}

OfflineTables::OfflineTables(int num_states, int horizon, int num_actions,
                             int num_mediators)
    : num_states_(num_states),
      horizon_(horizon),
      num_actions_(num_actions),
      num_mediators_(num_mediators) {
  if (num_states <= 0 || horizon < 0 || num_actions <= 0 || num_mediators <= 0) {
    throw ConfigError("offline table dimensions must be positive");
  }
  const std::size_t ys = static_cast<std::size_t>(num_states) * (horizon + 1);
  next_.init(ys * num_actions * num_mediators, num_states);
  action_.init(ys, num_actions);
  mediator_.init(ys * num_actions, num_mediators);
}

std::size_t OfflineTables::y_index(AugmentedState y) const {
  if (y.x < 0 || y.x >= num_states_ || y.k < 0 || y.k > horizon_) {
    throw EncodingError("offline tables: augmented state out of range " +
                        describe(y));
  }
  return static_cast<std::size_t>(y.k) * num_states_ + y.x;
}

std::size_t OfflineTables::yu_index(AugmentedState y, ActionIndex u) const {
  if (u < 0 || u >= num_actions_) {
    throw EncodingError("offline tables: unknown action " + std::to_string(u));
  }
  return y_index(y) * num_actions_ + u;
}

std::size_t OfflineTables::yum_index(AugmentedState y, ActionIndex u,
                                     MediatorId m) const {
  if (m < 0 || m >= num_mediators_) {
    throw EncodingError("offline tables: unknown mediator " + std::to_string(m));
  }
  return yu_index(y, u) * num_mediators_ + m;
}

bool OfflineTables::has_next(AugmentedState y, ActionIndex u,
                             MediatorId m) const {
  return next_.present[yum_index(y, u, m)];
}

std::span<const double> OfflineTables::next(AugmentedState y, ActionIndex u,
                                            MediatorId m) const {
  const std::size_t cell = yum_index(y, u, m);
  if (!next_.present[cell]) {
    throw PositivityError("no offline transitions from y=" + describe(y) +
                          " with u=" + std::to_string(u) +
                          ", m=" + std::to_string(m));
  }
  return next_.row(cell);
}

double OfflineTables::next_count(AugmentedState y, ActionIndex u,
                                 MediatorId m) const {
  return next_.counts[yum_index(y, u, m)];
}

bool OfflineTables::has_action(AugmentedState y) const {
  return action_.present[y_index(y)];
}

std::span<const double> OfflineTables::action(AugmentedState y) const {
  const std::size_t cell = y_index(y);
  if (!action_.present[cell]) {
    throw PositivityError("no offline actions logged at y=" + describe(y));
  }
  return action_.row(cell);
}

double OfflineTables::action_count(AugmentedState y) const {
  return action_.counts[y_index(y)];
}

bool OfflineTables::has_mediator(AugmentedState y, ActionIndex u) const {
  return mediator_.present[yu_index(y, u)];
}

std::span<const double> OfflineTables::mediator(AugmentedState y,
                                                ActionIndex u) const {
  const std::size_t cell = yu_index(y, u);
  if (!mediator_.present[cell]) {
    throw PositivityError("action " + std::to_string(u) +
                          " never logged at y=" + describe(y));
  }
  return mediator_.row(cell);
}

double OfflineTables::mediator_count(AugmentedState y, ActionIndex u) const {
  return mediator_.counts[yu_index(y, u)];
}

void OfflineTables::set_next(AugmentedState y, ActionIndex u, MediatorId m,
                             std::span<const double> row, double count) {
  next_.set(yum_index(y, u, m), row, count);
}

void OfflineTables::set_action(AugmentedState y, std::span<const double> row,
                               double count) {
  action_.set(y_index(y), row, count);
}

void OfflineTables::set_mediator(AugmentedState y, ActionIndex u,
                                 std::span<const double> row, double count) {
  mediator_.set(yu_index(y, u), row, count);
}

// ---------------------------------------------------------------------------

OfflineTables empirical_offline_tables(const EpisodeDataset& converted,
                                       int num_states, int num_actions,
                                       int num_mediators) {
  if (converted.form != DatasetForm::kConverted) {
    throw FormError("offline tables need a converted dataset");
  }
  const int H = converted.horizon;
  const int M = converted.has_mediators() ? num_mediators : 1;
  const std::size_t S = num_states, A = num_actions;
  const std::size_t ys = S * (H + 1);

  // Integer counts; ratios of exact integers make the tables invariant
  // under replicating every episode.
  std::vector<double> next_counts(ys * A * M * S, 0.0);
  std::vector<double> action_counts(ys * A, 0.0);
  std::vector<double> mediator_counts(ys * A * M, 0.0);

  auto check = [&](int value, int bound, const char* what) {
    if (value < 0 || value >= bound) {
      throw EncodingError(std::string("dataset has out-of-range ") + what +
                          " " + std::to_string(value));
    }
  };

  for (const Episode& e : converted.episodes) {
    for (int t = 0; t < H; ++t) {
      const StateId x = e.x[t];
      const ActionIndex u = e.u[t];
      const MediatorId m = e.m.empty() ? 0 : e.m[t];
      check(x, num_states, "state");
      check(e.x[t + 1], num_states, "state");
      check(u, num_actions, "action");
      check(m, M, "mediator");
      const std::size_t y = static_cast<std::size_t>(e.k[t]) * S + x;
      next_counts[((y * A + u) * M + m) * S + e.x[t + 1]] += 1.0;
      action_counts[y * A + u] += 1.0;
      mediator_counts[(y * A + u) * M + m] += 1.0;
    }
  }

  OfflineTables tables(num_states, H, num_actions, M);
  std::vector<double> row;
  auto normalize = [&row](const double* counts, std::size_t n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += counts[i];
    row.assign(counts, counts + n);
    if (total > 0.0) {
      for (double& v : row) v /= total;
    }
    return total;
  };

  for (int k = 0; k <= H; ++k) {
    for (StateId x = 0; x < num_states; ++x) {
      const AugmentedState y{x, k};
      const std::size_t yi = static_cast<std::size_t>(k) * S + x;
      if (const double n = normalize(&action_counts[yi * A], A); n > 0.0) {
        tables.set_action(y, row, n);
      }
      for (ActionIndex u = 0; u < num_actions; ++u) {
        const std::size_t yu = yi * A + u;
        if (const double n = normalize(&mediator_counts[yu * M], M); n > 0.0) {
          tables.set_mediator(y, u, row, n);
        }
        for (MediatorId m = 0; m < M; ++m) {
          const std::size_t cell = yu * M + m;
          if (const double n = normalize(&next_counts[cell * S], S); n > 0.0) {
            tables.set_next(y, u, m, row, n);
          }
        }
      }
    }
  }
  return tables;
}

OfflineTables exact_offline_tables(const Environment& env) {
  const ConfoundedMdpModel& model = env.model;
  const int H = model.horizon();
  const int S = model.num_states();
  const int A = model.num_actions();
  const int W = model.num_latent();
  const int M = env.mediator ? env.mediator->num_mediators() : 1;
  OfflineTables tables(S, H, A, M);

  std::vector<double> action_row(A), mediator_row(M), next_row(S);
  for (StateId x = 0; x < S; ++x) {
    const auto pw = model.latent_row(x);
    // P(u | x) = sum_w P(w|x) pi_b(u|x,w)
    std::fill(action_row.begin(), action_row.end(), 0.0);
    for (LatentId w = 0; w < W; ++w) {
      const auto pb = env.behavioral.latent_row(x, w);
      for (ActionIndex u = 0; u < A; ++u) action_row[u] += pw[w] * pb[u];
    }

    for (int k = 1; k <= H; ++k) {
      const AugmentedState y{x, k};
      tables.set_action(y, action_row);
      for (ActionIndex u = 0; u < A; ++u) {
        if (action_row[u] == 0.0) continue;
        if (env.mediator) {
          const auto pm = env.mediator->mediator_row(x, u);
          std::copy(pm.begin(), pm.end(), mediator_row.begin());
        } else {
          mediator_row.assign(1, 1.0);
        }
        tables.set_mediator(y, u, mediator_row);

        for (MediatorId m = 0; m < M; ++m) {
          if (mediator_row[m] == 0.0) continue;
          std::fill(next_row.begin(), next_row.end(), 0.0);
          if (!model.safe(x)) {
            next_row[x] = 1.0;
          } else {
            // Offline law of x' given (x, u, m): w is reweighted by the
            // behavioral policy; m is independent of w given (x, u).
            double den = 0.0;
            for (LatentId w = 0; w < W; ++w) {
              const double weight = pw[w] * env.behavioral.latent_row(x, w)[u];
              if (weight == 0.0) continue;
              const auto dyn = env.mediator ? env.mediator->mediated_row(x, m, w)
                                            : model.transition_row(x, u, w);
              for (StateId n = 0; n < S; ++n) next_row[n] += weight * dyn[n];
              den += weight;
            }
            for (double& p : next_row) p /= den;
          }
          tables.set_next(y, u, m, next_row);
        }
      }
    }
  }
  return tables;
}

}  // namespace causalsafe
