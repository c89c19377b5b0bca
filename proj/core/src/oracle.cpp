#include "causalsafe/oracle.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "text.hpp"

namespace causalsafe {

// ---------------------------------------------------------------------------
// Tables

ValueTable::ValueTable(int num_states, int horizon)
    : num_states_(num_states),
      horizon_(horizon),
      values_(static_cast<std::size_t>(num_states) * (horizon + 1), 0.0) {}

std::size_t ValueTable::index(AugmentedState y) const {
  if (y.x < 0 || y.x >= num_states_ || y.k < 0 || y.k > horizon_) {
    throw EncodingError("value table: augmented state out of range");
  }
  return static_cast<std::size_t>(y.k) * num_states_ + y.x;
}

QTable::QTable(int num_states, int horizon, int num_actions)
    : num_states_(num_states),
      horizon_(horizon),
      num_actions_(num_actions),
      values_(static_cast<std::size_t>(num_states) * (horizon + 1) *
                  num_actions,
              0.0),
      present_(static_cast<std::size_t>(num_states) * (horizon + 1), false) {}

std::size_t QTable::slot(AugmentedState y) const {
  if (y.x < 0 || y.x >= num_states_ || y.k < 0 || y.k > horizon_) {
    throw EncodingError("Q table: augmented state out of range");
  }
  return static_cast<std::size_t>(y.k) * num_states_ + y.x;
}

bool QTable::has_row(AugmentedState y) const { return present_[slot(y)]; }

std::span<const double> QTable::row(AugmentedState y) const {
  const std::size_t s = slot(y);
  if (!present_[s]) {
    throw CertificateUnavailable("no Q row at (x=" + std::to_string(y.x) +
                                 ", k=" + std::to_string(y.k) + ")");
  }
  return {values_.data() + s * num_actions_,
          static_cast<std::size_t>(num_actions_)};
}

void QTable::set_row(AugmentedState y, std::span<const double> values) {
  if (static_cast<int>(values.size()) != num_actions_) {
    throw ConfigError("Q row has wrong number of actions");
  }
  const std::size_t s = slot(y);
  std::copy(values.begin(), values.end(), values_.begin() + s * num_actions_);
  present_[s] = true;
}

MediatorQTable::MediatorQTable(int num_states, int horizon, int num_actions,
                               int num_mediators)
    : num_states_(num_states),
      horizon_(horizon),
      num_actions_(num_actions),
      num_mediators_(num_mediators),
      values_(static_cast<std::size_t>(num_states) * (horizon + 1) *
                  num_actions * num_mediators,
              0.0) {}

std::size_t MediatorQTable::index(AugmentedState y, ActionIndex u,
                                  MediatorId m) const {
  if (y.x < 0 || y.x >= num_states_ || y.k < 0 || y.k > horizon_ || u < 0 ||
      u >= num_actions_ || m < 0 || m >= num_mediators_) {
    throw EncodingError("Q_M table: index out of range");
  }
  return ((static_cast<std::size_t>(y.k) * num_states_ + y.x) * num_actions_ +
          u) *
             num_mediators_ +
         m;
}

// ---------------------------------------------------------------------------
// Dynamic programming

namespace {

// Online kernel restricted to the safe set. Every unsafe successor is
// folded into one absorbing sentinel whose value is 0 for all k (unsafe at
// k = 0 earns no reward, and the sentinel never leaves), so it needs no
// storage: its contribution to any expectation is zero.
struct SafeSetKernel {
  struct Entry {
    int to;  // index into safe_states
    double prob;
  };

  std::vector<StateId> safe_states;
  std::vector<int> safe_index;  // -1 for unsafe states
  int num_actions = 0;
  std::vector<std::vector<Entry>> rows;  // [i * A + u]

  explicit SafeSetKernel(const ConfoundedMdpModel& model) {
    const ObservedKernel online = online_kernel(model);
    safe_index.assign(model.num_states(), -1);
    for (StateId x = 0; x < model.num_states(); ++x) {
      if (model.safe(x)) {
        safe_index[x] = static_cast<int>(safe_states.size());
        safe_states.push_back(x);
      }
    }
    num_actions = model.num_actions();
    rows.resize(safe_states.size() * num_actions);
    for (std::size_t i = 0; i < safe_states.size(); ++i) {
      for (ActionIndex u = 0; u < num_actions; ++u) {
        const auto row = online.row(safe_states[i], u);
        auto& entries = rows[i * num_actions + u];
        for (StateId next = 0; next < model.num_states(); ++next) {
          if (row[next] > 0.0 && safe_index[next] >= 0) {
            entries.push_back({safe_index[next], row[next]});
          }
        }
      }
    }
  }

  double expect(std::size_t i, ActionIndex u,
                const std::vector<double>& prev) const {
    double acc = 0.0;
    for (const Entry& e : rows[i * num_actions + u]) acc += e.prob * prev[e.to];
    return acc;
  }
};

void check_policy(const ConfoundedMdpModel& model, const TabularPolicy& pi) {
  if (pi.kind() != PolicyKind::kLatentBlind) {
    throw ConfigError("evaluation policy must be latent-blind");
  }
  if (pi.num_states() != model.num_states() ||
      pi.num_actions() != model.num_actions() ||
      pi.second_dim() < model.horizon() + 1) {
    throw ConfigError("policy dimensions do not match the model");
  }
}

}  // namespace

OracleSolution solve_oracle(const ConfoundedMdpModel& model,
                            const TabularPolicy& pi) {
  check_policy(model, pi);
  const int H = model.horizon();
  const int A = model.num_actions();
  const SafeSetKernel kernel(model);
  const std::size_t n = kernel.safe_states.size();

  OracleSolution out{ValueTable(model.num_states(), H),
                     QTable(model.num_states(), H, A)};
  std::vector<double> q_row(A);

  // k = 0: terminal reward only.
  std::vector<double> prev(n, 1.0);
  for (StateId x = 0; x < model.num_states(); ++x) {
    const double r = model.safe(x) ? 1.0 : 0.0;
    out.value({x, 0}) = r;
    std::fill(q_row.begin(), q_row.end(), r);
    out.q.set_row({x, 0}, q_row);
  }

  std::vector<double> cur(n);
  const std::vector<double> zeros(A, 0.0);
  for (int k = 1; k <= H; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const StateId x = kernel.safe_states[i];
      const auto probs = pi.row({x, k});
      double v = 0.0;
      for (ActionIndex u = 0; u < A; ++u) {
        q_row[u] = kernel.expect(i, u, prev);
        v += probs[u] * q_row[u];
      }
      cur[i] = v;
      out.value({x, k}) = v;
      out.q.set_row({x, k}, q_row);
    }
    for (StateId x = 0; x < model.num_states(); ++x) {
      if (kernel.safe_index[x] < 0) out.q.set_row({x, k}, zeros);
    }
    prev.swap(cur);
  }
  return out;
}

ValueTable value_dp(const ConfoundedMdpModel& model, const TabularPolicy& pi) {
  return solve_oracle(model, pi).value;
}

QTable q_dp(const ConfoundedMdpModel& model, const TabularPolicy& pi) {
  return solve_oracle(model, pi).q;
}

MediatorQTable qm_dp(const ConfoundedMdpModel& model,
                     const std::optional<MediatorModel>& mediator,
                     const TabularPolicy& pi) {
  if (!mediator) {
    throw UnsupportedEnvironment("environment has no mediator");
  }
  const int H = model.horizon();
  const int S = model.num_states();
  const int A = model.num_actions();
  const int M = mediator->num_mediators();
  const ValueTable v = value_dp(model, pi);
  MediatorQTable qm(S, H, A, M);

  std::vector<double> next_dist(S);
  for (int k = 0; k <= H; ++k) {
    for (StateId x = 0; x < S; ++x) {
      const bool safe = model.safe(x);
      for (MediatorId m = 0; m < M; ++m) {
        double value = 0.0;
        if (k == 0) {
          value = safe ? 1.0 : 0.0;
        } else if (safe) {
          // P_online(x' | x, m): latent marginalized, action irrelevant.
          std::fill(next_dist.begin(), next_dist.end(), 0.0);
          const auto pw = model.latent_row(x);
          for (LatentId w = 0; w < model.num_latent(); ++w) {
            if (pw[w] == 0.0) continue;
            const auto row = mediator->mediated_row(x, m, w);
            for (StateId y = 0; y < S; ++y) next_dist[y] += pw[w] * row[y];
          }
          for (StateId y = 0; y < S; ++y) {
            value += next_dist[y] * v({y, k - 1});
          }
        }
        for (ActionIndex u = 0; u < A; ++u) qm({x, k}, u, m) = value;
      }
    }
  }
  return qm;
}

double brute_force_psi(const ConfoundedMdpModel& model,
                       const TabularPolicy& pi, StateId x, int t) {
  check_policy(model, pi);
  model.check_state(x);
  const int H = model.horizon();
  if (t < 0 || t > H) throw ConfigError("time index out of range");
  const int steps = H - t;
  const double count = std::pow(static_cast<double>(model.num_states()), steps);
  if (count > 1e7) {
    throw SizeError("brute-force enumeration of " + std::to_string(count) +
                    " trajectories exceeds 1e7");
  }

  // Odometer over x_{t+1..H}; each trajectory is scored independently.
  std::vector<StateId> path(steps, 0);
  double total = 0.0;
  for (;;) {
    bool all_safe = model.safe(x);
    double weight = 1.0;
    StateId cur = x;
    for (int s = 0; s < steps; ++s) {
      const StateId next = path[s];
      const auto probs = pi.row({cur, H - (t + s)});
      double step = 0.0;
      for (ActionIndex u = 0; u < model.num_actions(); ++u) {
        step += probs[u] * p_online(model, next, cur, u);
      }
      weight *= step;
      all_safe = all_safe && model.safe(next);
      cur = next;
    }
    if (all_safe) total += weight;

    int pos = 0;
    while (pos < steps && ++path[pos] == model.num_states()) path[pos++] = 0;
    if (pos == steps) break;
  }
  return total;
}

std::vector<double> propagate_absorbing(const ConfoundedMdpModel& model,
                                        const ActionDistributionFn& controller,
                                        StateId x0, int t) {
  model.check_state(x0);
  if (t < 0 || t > model.horizon()) {
    throw ConfigError("time index out of range");
  }
  const int S = model.num_states();
  const ObservedKernel online = online_kernel(model);
  std::vector<double> dist(S, 0.0);
  dist[x0] = 1.0;
  std::vector<double> next(S);
  for (int s = 0; s < t; ++s) {
    std::fill(next.begin(), next.end(), 0.0);
    for (StateId x = 0; x < S; ++x) {
      if (dist[x] == 0.0) continue;
      if (!model.safe(x)) {
        next[x] += dist[x];
        continue;
      }
      const std::vector<double> action = controller(x, s);
      for (ActionIndex u = 0; u < model.num_actions(); ++u) {
        if (action[u] == 0.0) continue;
        const auto row = online.row(x, u);
        const double mass = dist[x] * action[u];
        for (StateId y = 0; y < S; ++y) next[y] += mass * row[y];
      }
    }
    dist.swap(next);
  }
  return dist;
}

double mixed_policy_long_term_safety(const ConfoundedMdpModel& model,
                                     const ActionDistributionFn& controller,
                                     const ValueTable& value, int t,
                                     StateId x0) {
  const std::vector<double> dist = propagate_absorbing(model, controller, x0, t);
  const int k = model.horizon() - t;
  double total = 0.0;
  for (StateId x = 0; x < model.num_states(); ++x) {
    if (dist[x] != 0.0) total += dist[x] * value({x, k});
  }
  return total;
}

void write_oracle_csv(std::ostream& out, const QTable& q) {
  out << "state,k,action,value\n";
  for (int k = 0; k <= q.horizon(); ++k) {
    for (StateId x = 0; x < q.num_states(); ++x) {
      if (!q.has_row({x, k})) continue;
      const auto row = q.row({x, k});
      for (ActionIndex u = 0; u < q.num_actions(); ++u) {
        out << x << ',' << k << ',' << u << ','
            << detail::format_double(row[u]) << '\n';
      }
    }
  }
}

void write_value_csv(std::ostream& out, const ValueTable& v) {
  out << "state,k,value\n";
  for (int k = 0; k <= v.horizon(); ++k) {
    for (StateId x = 0; x < v.num_states(); ++x) {
      out << x << ',' << k << ',' << detail::format_double(v({x, k})) << '\n';
    }
  }
}

}  // namespace causalsafe
