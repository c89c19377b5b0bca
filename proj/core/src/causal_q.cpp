#include "causalsafe/causal_q.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "text.hpp"

namespace causalsafe {

std::vector<double> front_door_online_kernel(const OfflineTables& tables,
                                             AugmentedState y, ActionIndex u) {
  if (y.k <= 0) {
    throw EndOfEpisodeError("no transition from an augmented state with k = 0");
  }
  const auto pm = tables.mediator(y, u);
  const auto pu = tables.action(y);
  std::vector<double> out(tables.num_states(), 0.0);
  for (MediatorId m = 0; m < tables.num_mediators(); ++m) {
    if (pm[m] == 0.0) continue;
    for (ActionIndex up = 0; up < tables.num_actions(); ++up) {
      if (pu[up] == 0.0) continue;
      const double weight = pm[m] * pu[up];
      const auto next = tables.next(y, up, m);
      for (StateId x = 0; x < tables.num_states(); ++x) {
        out[x] += weight * next[x];
      }
    }
  }
  return out;
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double terminal_reward(const ConfoundedMdpModel& model, StateId x) {
  return model.safe(x) ? 1.0 : 0.0;
}

// Front-door average over the logged action for one (ŷ, m). Positive-weight
// cells that were never visited contribute 0 and are counted.
double adjusted_value(const MediatorQTable& cell, const OfflineTables& tables,
                      AugmentedState y, MediatorId m, std::size_t* unvisited) {
  const auto pu = tables.action(y);
  double v = 0.0;
  for (ActionIndex up = 0; up < tables.num_actions(); ++up) {
    if (pu[up] == 0.0) continue;
    if (!tables.has_next(y, up, m)) {
      if (unvisited) ++*unvisited;
      continue;
    }
    v += pu[up] * cell(y, up, m);
  }
  return v;
}

}  // namespace

FittedQm fitted_qm(const ConfoundedMdpModel& model, const OfflineTables& tables,
                   const TabularPolicy& pi, const FittedQmOptions& options) {
  const int S = tables.num_states();
  const int H = tables.horizon();
  const int A = tables.num_actions();
  const int M = tables.num_mediators();
  if (S != model.num_states() || A != model.num_actions()) {
    throw ConfigError("offline tables do not match the model");
  }
  if (options.tolerance <= 0.0 || options.max_iters <= 0) {
    throw ConfigError("fitted Q needs a positive tolerance and iteration cap");
  }

  FittedQm out{.q = MediatorQTable(S, H, A, M),
               .cell = MediatorQTable(S, H, A, M),
               .warnings = {}};
  const auto ys = static_cast<std::size_t>(S) * (H + 1);
  std::vector<double> value(ys, 0.0);
  std::vector<double> adjusted(ys * M, 0.0);
  auto at = [S](AugmentedState y) {
    return static_cast<std::size_t>(y.k) * S + y.x;
  };

  for (StateId x = 0; x < S; ++x) {
    const double r = terminal_reward(model, x);
    for (ActionIndex u = 0; u < A; ++u) {
      for (MediatorId m = 0; m < M; ++m) out.cell({x, 0}, u, m) = r;
    }
  }

  auto refresh_value = [&](std::size_t* unvisited) {
    for (int k = 0; k <= H; ++k) {
      for (StateId x = 0; x < S; ++x) {
        const AugmentedState y{x, k};
        const std::size_t i = at(y);
        if (k == 0) {
          value[i] = terminal_reward(model, x);
          std::fill_n(adjusted.begin() + i * M, M, value[i]);
          continue;
        }
        value[i] = 0.0;
        std::fill_n(adjusted.begin() + i * M, M, 0.0);
        if (!model.safe(x) || !tables.has_action(y)) continue;
        for (MediatorId m = 0; m < M; ++m) {
          adjusted[i * M + m] = adjusted_value(out.cell, tables, y, m, unvisited);
        }
        const auto probs = pi.row(y);
        double v = 0.0;
        for (ActionIndex u = 0; u < A; ++u) {
          if (probs[u] == 0.0) continue;
          const auto pm = tables.mediator(y, u);
          for (MediatorId m = 0; m < M; ++m) {
            v += probs[u] * pm[m] * adjusted[i * M + m];
          }
        }
        value[i] = clamp01(v);
      }
    }
  };

  for (;;) {
    refresh_value(nullptr);
    double residual = 0.0;
    for (int k = 1; k <= H; ++k) {
      for (StateId x = 0; x < S; ++x) {
        const AugmentedState y{x, k};
        const bool safe = model.safe(x);
        for (ActionIndex u = 0; u < A; ++u) {
          for (MediatorId m = 0; m < M; ++m) {
            if (!tables.has_next(y, u, m)) continue;
            double target = 0.0;
            if (safe) {
              const auto next = tables.next(y, u, m);
              for (StateId n = 0; n < S; ++n) {
                if (next[n] != 0.0) target += next[n] * value[at({n, k - 1})];
              }
            }
            target = clamp01(target);
            residual = std::max(residual, std::abs(target - out.cell(y, u, m)));
            out.cell(y, u, m) = target;
          }
        }
      }
    }
    ++out.iterations;
    out.residual = residual;
    if (residual < options.tolerance) break;
    if (out.iterations >= options.max_iters) {
      throw ConvergenceError("fitted Q did not converge in " +
                                 std::to_string(out.iterations) + " sweeps",
                             out.iterations, residual);
    }
  }

  refresh_value(&out.unvisited);
  for (int k = 0; k <= H; ++k) {
    for (StateId x = 0; x < S; ++x) {
      const std::size_t i = at({x, k});
      for (ActionIndex u = 0; u < A; ++u) {
        for (MediatorId m = 0; m < M; ++m) {
          out.q({x, k}, u, m) = adjusted[i * M + m];
        }
      }
    }
  }
  if (out.unvisited > 0) {
    out.warnings.push_back(std::to_string(out.unvisited) +
                           " unvisited (state, k, action, mediator) cells "
                           "were treated as 0");
  }
  return out;
}

FittedQm fitted_qm(const ConfoundedMdpModel& model,
                   const EpisodeDataset& converted, int num_mediators,
                   const TabularPolicy& pi, const FittedQmOptions& options) {
  if (converted.form != DatasetForm::kConverted) {
    throw FormError("fitted Q needs a converted dataset");
  }
  if (converted.episodes.empty()) {
    throw PositivityError("fitted Q on an empty dataset");
  }
  if (!converted.has_mediators()) {
    throw UnsupportedEnvironment("dataset has no mediator sequences");
  }
  const OfflineTables tables = empirical_offline_tables(
      converted, model.num_states(), model.num_actions(), num_mediators);
  return fitted_qm(model, tables, pi, options);
}

double value_from_qm(const MediatorQTable& qm, const OfflineTables& tables,
                     const TabularPolicy& pi, const ConfoundedMdpModel& model,
                     AugmentedState y) {
  if (y.k == 0) return terminal_reward(model, y.x);
  const auto probs = pi.row(y);
  double v = 0.0;
  for (ActionIndex u = 0; u < tables.num_actions(); ++u) {
    if (probs[u] == 0.0) continue;
    v += probs[u] * q_from_qm(qm, tables, y, u);
  }
  return v;
}

double q_from_qm(const MediatorQTable& qm, const OfflineTables& tables,
                 AugmentedState y, ActionIndex u) {
  const auto pm = tables.mediator(y, u);
  double q = 0.0;
  for (MediatorId m = 0; m < tables.num_mediators(); ++m) {
    if (pm[m] != 0.0) q += pm[m] * qm(y, u, m);
  }
  return q;
}

QTable q_table_from_qm(const MediatorQTable& qm, const OfflineTables& tables,
                       const ConfoundedMdpModel& model) {
  const int S = qm.num_states(), H = qm.horizon(), A = qm.num_actions();
  QTable out(S, H, A);
  std::vector<double> row(A);
  for (int k = 0; k <= H; ++k) {
    for (StateId x = 0; x < S; ++x) {
      const AugmentedState y{x, k};
      if (k == 0 || !model.safe(x)) {
        std::fill(row.begin(), row.end(), k == 0 ? terminal_reward(model, x) : 0.0);
        out.set_row(y, row);
        continue;
      }
      bool complete = true;
      for (ActionIndex u = 0; u < A && complete; ++u) {
        complete = tables.has_mediator(y, u);
      }
      if (!complete) continue;
      for (ActionIndex u = 0; u < A; ++u) row[u] = q_from_qm(qm, tables, y, u);
      out.set_row(y, row);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

void write_qm_csv(std::ostream& out, const MediatorQTable& qm) {
  out << "state,k,action,mediator,value\n";
  for (int k = 0; k <= qm.horizon(); ++k) {
    for (StateId x = 0; x < qm.num_states(); ++x) {
      for (ActionIndex u = 0; u < qm.num_actions(); ++u) {
        for (MediatorId m = 0; m < qm.num_mediators(); ++m) {
          out << x << ',' << k << ',' << u << ',' << m << ','
              << detail::format_double(qm({x, k}, u, m)) << '\n';
        }
      }
    }
  }
  if (!out) throw IoError("failed writing Q_M table");
}

namespace {

// Reads a header plus rows of `columns` fields; calls fn(fields) per row.
template <typename Fn>
void read_csv_rows(std::istream& in, std::string_view header,
                   std::size_t columns, Fn&& fn) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) {
    throw IoError("unexpected CSV header '" + line + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != columns) {
      throw IoError("CSV line " + std::to_string(line_no) + " has " +
                    std::to_string(fields.size()) + " fields");
    }
    fn(fields);
  }
}

int as_int(std::string_view s) { return static_cast<int>(detail::parse_int(s)); }

}  // namespace

MediatorQTable read_qm_csv(std::istream& in, int num_states, int horizon,
                           int num_actions, int num_mediators) {
  MediatorQTable qm(num_states, horizon, num_actions, num_mediators);
  read_csv_rows(in, "state,k,action,mediator,value", 5, [&](const auto& f) {
    qm({as_int(f[0]), as_int(f[1])}, as_int(f[2]), as_int(f[3])) =
        detail::parse_double(f[4]);
  });
  return qm;
}

QTable read_q_csv(std::istream& in, int num_states, int horizon,
                  int num_actions) {
  QTable q(num_states, horizon, num_actions);
  const auto ys = static_cast<std::size_t>(num_states) * (horizon + 1);
  std::vector<double> values(ys * num_actions, 0.0);
  std::vector<int> seen(ys, 0);
  read_csv_rows(in, "state,k,action,value", 4, [&](const auto& f) {
    const AugmentedState y{as_int(f[0]), as_int(f[1])};
    const int u = as_int(f[2]);
    if (y.x < 0 || y.x >= num_states || y.k < 0 || y.k > horizon || u < 0 ||
        u >= num_actions) {
      throw EncodingError("Q CSV entry out of range");
    }
    const std::size_t i = static_cast<std::size_t>(y.k) * num_states + y.x;
    values[i * num_actions + u] = detail::parse_double(f[3]);
    ++seen[i];
  });
  for (std::size_t i = 0; i < ys; ++i) {
    if (seen[i] == 0) continue;
    if (seen[i] != num_actions) {
      throw IoError("Q CSV has an incomplete row");
    }
    const AugmentedState y{static_cast<StateId>(i % num_states),
                           static_cast<int>(i / num_states)};
    q.set_row(y, {values.data() + i * num_actions,
                  static_cast<std::size_t>(num_actions)});
  }
  return q;
}

}  // namespace causalsafe
