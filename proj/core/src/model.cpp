#include "causalsafe/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

namespace causalsafe {
namespace {

void check_normalized(std::span<const double> row, const std::string& what) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0) || p > 1.0 + kNormTolerance) {
      throw ConfigError(what + ": probability out of [0,1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kNormTolerance) {
    std::ostringstream msg;
    msg << what << ": row sums to " << sum;
    throw ConfigError(msg.str());
  }
}

std::string cell_name(const char* prefix, int a, int b) {
  return std::string(prefix) + "(" + std::to_string(a) + "," +
         std::to_string(b) + ")";
}

}  // namespace

// ---------------------------------------------------------------------------
// ConfoundedMdpModel

ConfoundedMdpModel::ConfoundedMdpModel(int num_states,
                                       std::vector<int> action_values,
                                       int num_latent, int horizon,
                                       std::vector<double> transition,
                                       std::vector<double> latent_dist,
                                       std::vector<bool> safe) {
  if (num_states <= 0 || num_latent <= 0 || action_values.empty()) {
    throw ConfigError("model needs at least one state, action and latent value");
  }
  if (horizon < 0) throw ConfigError("horizon must be nonnegative");
  const std::size_t S = num_states;
  const std::size_t A = action_values.size();
  const std::size_t W = num_latent;
  if (transition.size() != S * A * W * S) {
    throw ConfigError("transition table has wrong size");
  }
  if (latent_dist.size() != S * W) {
    throw ConfigError("latent distribution table has wrong size");
  }
  if (safe.size() != S) throw ConfigError("safety table has wrong size");

  for (std::size_t x = 0; x < S; ++x) {
    check_normalized({latent_dist.data() + x * W, W},
                     "P(w|x) row x=" + std::to_string(x));
    for (std::size_t u = 0; u < A; ++u) {
      for (std::size_t w = 0; w < W; ++w) {
        const std::size_t off = ((x * A + u) * W + w) * S;
        check_normalized({transition.data() + off, S},
                         "P(x'|x,u,w) row (" + std::to_string(x) + "," +
                             std::to_string(u) + "," + std::to_string(w) + ")");
      }
    }
  }

  auto tables = std::make_shared<Tables>();
  tables->num_states = num_states;
  tables->num_latent = num_latent;
  tables->actions = std::move(action_values);
  tables->transition = std::move(transition);
  tables->latent_dist = std::move(latent_dist);
  tables->safe = std::move(safe);
  tables->num_safe = static_cast<int>(
      std::count(tables->safe.begin(), tables->safe.end(), true));
  tables_ = std::move(tables);
  horizon_ = horizon;
}

int ConfoundedMdpModel::action_value(ActionIndex u) const {
  check_action(u);
  return tables_->actions[u];
}

bool ConfoundedMdpModel::safe(StateId x) const {
  check_state(x);
  return tables_->safe[x];
}

int ConfoundedMdpModel::num_safe() const { return tables_->num_safe; }

std::span<const double> ConfoundedMdpModel::transition_row(StateId x,
                                                           ActionIndex u,
                                                           LatentId w) const {
  check_state(x);
  check_action(u);
  check_latent(w);
  const std::size_t S = num_states();
  const std::size_t off =
      ((static_cast<std::size_t>(x) * num_actions() + u) * num_latent() + w) * S;
  return {tables_->transition.data() + off, S};
}

std::span<const double> ConfoundedMdpModel::latent_row(StateId x) const {
  check_state(x);
  const std::size_t W = num_latent();
  return {tables_->latent_dist.data() + x * W, W};
}

ConfoundedMdpModel ConfoundedMdpModel::with_horizon(int horizon) const {
  if (horizon < 0) throw ConfigError("horizon must be nonnegative");
  return ConfoundedMdpModel(tables_, horizon);
}

void ConfoundedMdpModel::check_state(StateId x) const {
  if (x < 0 || x >= tables_->num_states) {
    throw EncodingError("unknown state id " + std::to_string(x));
  }
}

void ConfoundedMdpModel::check_action(ActionIndex u) const {
  if (u < 0 || u >= static_cast<int>(tables_->actions.size())) {
    throw EncodingError("unknown action index " + std::to_string(u));
  }
}

void ConfoundedMdpModel::check_latent(LatentId w) const {
  if (w < 0 || w >= tables_->num_latent) {
    throw EncodingError("unknown latent value " + std::to_string(w));
  }
}

// ---------------------------------------------------------------------------
// TabularPolicy

TabularPolicy::TabularPolicy(PolicyKind kind, int num_states, int second_dim,
                             int num_actions)
    : kind_(kind),
      num_states_(num_states),
      second_dim_(second_dim),
      num_actions_(num_actions) {
  if (num_states <= 0 || second_dim <= 0 || num_actions <= 0) {
    throw ConfigError("policy dimensions must be positive");
  }
  const std::size_t rows = static_cast<std::size_t>(num_states) * second_dim;
  probs_.assign(rows * num_actions, 0.0);
  set_.assign(rows, false);
}

TabularPolicy TabularPolicy::latent_blind(int num_states, int horizon,
                                          int num_actions) {
  return TabularPolicy(PolicyKind::kLatentBlind, num_states, horizon + 1,
                       num_actions);
}

TabularPolicy TabularPolicy::latent_aware(int num_states, int num_latent,
                                          int num_actions) {
  return TabularPolicy(PolicyKind::kLatentAware, num_states, num_latent,
                       num_actions);
}

TabularPolicy TabularPolicy::uniform(int num_states, int horizon,
                                     int num_actions) {
  TabularPolicy policy = latent_blind(num_states, horizon, num_actions);
  const std::vector<double> row(num_actions, 1.0 / num_actions);
  for (int k = 0; k <= horizon; ++k) {
    for (StateId x = 0; x < num_states; ++x) policy.set_row({x, k}, row);
  }
  return policy;
}

std::size_t TabularPolicy::offset(StateId x, int j) const {
  if (x < 0 || x >= num_states_) {
    throw EncodingError("policy: unknown state id " + std::to_string(x));
  }
  if (j < 0 || j >= second_dim_) {
    throw EncodingError("policy: index out of range " + std::to_string(j));
  }
  return static_cast<std::size_t>(j) * num_states_ + x;
}

void TabularPolicy::store(std::size_t slot, std::span<const double> probs) {
  if (static_cast<int>(probs.size()) != num_actions_) {
    throw ConfigError("policy row has wrong number of actions");
  }
  check_normalized(probs, "policy row");
  std::copy(probs.begin(), probs.end(), probs_.begin() + slot * num_actions_);
  set_[slot] = true;
}

void TabularPolicy::set_row(AugmentedState y, std::span<const double> probs) {
  if (kind_ != PolicyKind::kLatentBlind) {
    throw ConfigError("set_row on a latent-aware policy");
  }
  store(offset(y.x, y.k), probs);
}

bool TabularPolicy::has_row(AugmentedState y) const {
  if (kind_ != PolicyKind::kLatentBlind) return false;
  if (y.x < 0 || y.x >= num_states_ || y.k < 0 || y.k >= second_dim_) {
    return false;
  }
  return set_[offset(y.x, y.k)];
}

std::span<const double> TabularPolicy::row(AugmentedState y) const {
  if (kind_ != PolicyKind::kLatentBlind) {
    throw ConfigError("latent-aware policy cannot be queried without w");
  }
  const std::size_t slot = offset(y.x, y.k);
  if (!set_[slot]) {
    throw ConfigError("policy row missing at " + cell_name("y", y.x, y.k));
  }
  return {probs_.data() + slot * num_actions_,
          static_cast<std::size_t>(num_actions_)};
}

void TabularPolicy::set_latent_row(StateId x, LatentId w,
                                   std::span<const double> probs) {
  if (kind_ != PolicyKind::kLatentAware) {
    throw ConfigError("set_latent_row on a latent-blind policy");
  }
  store(offset(x, w), probs);
}

std::span<const double> TabularPolicy::latent_row(StateId x, LatentId w) const {
  if (kind_ != PolicyKind::kLatentAware) {
    throw ConfigError("latent-blind policy has no latent rows");
  }
  const std::size_t slot = offset(x, w);
  if (!set_[slot]) {
    throw ConfigError("behavioral row missing at " + cell_name("(x,w)", x, w));
  }
  return {probs_.data() + slot * num_actions_,
          static_cast<std::size_t>(num_actions_)};
}

// ---------------------------------------------------------------------------
// MediatorModel

MediatorModel::MediatorModel(int num_states, int num_actions, int num_latent,
                             int num_mediators,
                             std::vector<double> mediator_dist,
                             std::vector<double> mediated_transition)
    : num_states_(num_states),
      num_actions_(num_actions),
      num_latent_(num_latent),
      num_mediators_(num_mediators),
      mediator_dist_(std::move(mediator_dist)),
      mediated_transition_(std::move(mediated_transition)) {
  const std::size_t S = num_states, A = num_actions, W = num_latent,
                    M = num_mediators;
  if (mediator_dist_.size() != S * A * M ||
      mediated_transition_.size() != S * M * W * S) {
    throw ConfigError("mediator tables have wrong size");
  }
  for (std::size_t x = 0; x < S; ++x) {
    for (std::size_t u = 0; u < A; ++u) {
      check_normalized({mediator_dist_.data() + (x * A + u) * M, M},
                       "P(m|x,u)");
    }
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t w = 0; w < W; ++w) {
        check_normalized(
            {mediated_transition_.data() + ((x * M + m) * W + w) * S, S},
            "P(x'|x,m,w)");
      }
    }
  }
}

std::span<const double> MediatorModel::mediator_row(StateId x,
                                                    ActionIndex u) const {
  if (x < 0 || x >= num_states_ || u < 0 || u >= num_actions_) {
    throw EncodingError("mediator_row: bad (x,u)");
  }
  const std::size_t M = num_mediators_;
  return {mediator_dist_.data() +
              (static_cast<std::size_t>(x) * num_actions_ + u) * M,
          M};
}

std::span<const double> MediatorModel::mediated_row(StateId x, MediatorId m,
                                                    LatentId w) const {
  if (x < 0 || x >= num_states_ || m < 0 || m >= num_mediators_ || w < 0 ||
      w >= num_latent_) {
    throw EncodingError("mediated_row: bad (x,m,w)");
  }
  const std::size_t S = num_states_;
  return {mediated_transition_.data() +
              ((static_cast<std::size_t>(x) * num_mediators_ + m) *
                   num_latent_ +
               w) *
                  S,
          S};
}

std::vector<double> MediatorModel::marginal_transition() const {
  const std::size_t S = num_states_, A = num_actions_, W = num_latent_;
  std::vector<double> out(S * A * W * S, 0.0);
  for (StateId x = 0; x < num_states_; ++x) {
    for (ActionIndex u = 0; u < num_actions_; ++u) {
      const auto pm = mediator_row(x, u);
      for (LatentId w = 0; w < num_latent_; ++w) {
        double* dst = out.data() + ((x * A + u) * W + w) * S;
        for (MediatorId m = 0; m < num_mediators_; ++m) {
          const auto next = mediated_row(x, m, w);
          for (std::size_t y = 0; y < S; ++y) dst[y] += pm[m] * next[y];
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Observed statistics

double p_online(const ConfoundedMdpModel& model, StateId next, StateId x,
                ActionIndex u) {
  model.check_state(next);
  const auto pw = model.latent_row(x);
  double p = 0.0;
  for (LatentId w = 0; w < model.num_latent(); ++w) {
    if (pw[w] == 0.0) continue;
    p += pw[w] * model.transition_row(x, u, w)[next];
  }
  return p;
}

double p_offline(const ConfoundedMdpModel& model,
                 const TabularPolicy& behavioral, StateId next, StateId x,
                 ActionIndex u) {
  if (behavioral.kind() != PolicyKind::kLatentAware) {
    throw ConfigError("offline statistics need the latent-aware behavioral policy");
  }
  model.check_state(next);
  model.check_action(u);
  const auto pw = model.latent_row(x);
  double num = 0.0;
  double den = 0.0;
  for (LatentId w = 0; w < model.num_latent(); ++w) {
    const double weight = pw[w] * behavioral.latent_row(x, w)[u];
    if (weight == 0.0) continue;
    num += weight * model.transition_row(x, u, w)[next];
    den += weight;
  }
  if (den == 0.0) {
    throw PositivityError("behavioral policy never takes action " +
                          std::to_string(u) + " at state " + std::to_string(x));
  }
  return num / den;
}

ObservedKernel::ObservedKernel(int num_states, int num_actions,
                               std::vector<double> rows,
                               std::vector<bool> defined)
    : num_states_(num_states),
      num_actions_(num_actions),
      rows_(std::move(rows)),
      defined_(std::move(defined)) {
  const std::size_t cells = static_cast<std::size_t>(num_states) * num_actions;
  if (defined_.size() != cells || rows_.size() != cells * num_states) {
    throw ConfigError("observed kernel has wrong size");
  }
}

bool ObservedKernel::defined(StateId x, ActionIndex u) const {
  if (x < 0 || x >= num_states_ || u < 0 || u >= num_actions_) {
    throw EncodingError("observed kernel: bad (x,u)");
  }
  return defined_[static_cast<std::size_t>(x) * num_actions_ + u];
}

std::span<const double> ObservedKernel::row(StateId x, ActionIndex u) const {
  if (!defined(x, u)) {
    throw PositivityError("observed kernel row undefined at " +
                          cell_name("(x,u)", x, u));
  }
  const std::size_t S = num_states_;
  return {rows_.data() + (static_cast<std::size_t>(x) * num_actions_ + u) * S,
          S};
}

ObservedKernel online_kernel(const ConfoundedMdpModel& model) {
  const std::size_t S = model.num_states(), A = model.num_actions();
  std::vector<double> rows(S * A * S, 0.0);
  for (StateId x = 0; x < model.num_states(); ++x) {
    const auto pw = model.latent_row(x);
    for (ActionIndex u = 0; u < model.num_actions(); ++u) {
      double* dst = rows.data() + (x * A + u) * S;
      for (LatentId w = 0; w < model.num_latent(); ++w) {
        if (pw[w] == 0.0) continue;
        const auto next = model.transition_row(x, u, w);
        for (std::size_t y = 0; y < S; ++y) dst[y] += pw[w] * next[y];
      }
    }
  }
  return ObservedKernel(model.num_states(), model.num_actions(),
                        std::move(rows), std::vector<bool>(S * A, true));
}

ObservedKernel offline_kernel(const ConfoundedMdpModel& model,
                              const TabularPolicy& behavioral) {
  if (behavioral.kind() != PolicyKind::kLatentAware) {
    throw ConfigError("offline statistics need the latent-aware behavioral policy");
  }
  const std::size_t S = model.num_states(), A = model.num_actions();
  std::vector<double> rows(S * A * S, 0.0);
  std::vector<bool> defined(S * A, false);
  for (StateId x = 0; x < model.num_states(); ++x) {
    const auto pw = model.latent_row(x);
    for (ActionIndex u = 0; u < model.num_actions(); ++u) {
      double* dst = rows.data() + (x * A + u) * S;
      double den = 0.0;
      for (LatentId w = 0; w < model.num_latent(); ++w) {
        const double weight = pw[w] * behavioral.latent_row(x, w)[u];
        if (weight == 0.0) continue;
        const auto next = model.transition_row(x, u, w);
        for (std::size_t y = 0; y < S; ++y) dst[y] += weight * next[y];
        den += weight;
      }
      if (den == 0.0) continue;
      for (std::size_t y = 0; y < S; ++y) dst[y] /= den;
      defined[x * A + u] = true;
    }
  }
  return ObservedKernel(model.num_states(), model.num_actions(),
                        std::move(rows), std::move(defined));
}

std::vector<Transition> absorbing_kernel(const ObservedKernel& base,
                                         const ConfoundedMdpModel& model,
                                         AugmentedState y, ActionIndex u) {
  model.check_state(y.x);
  model.check_action(u);
  if (y.k <= 0) {
    throw EndOfEpisodeError("no transition out of k = 0 at state " +
                            std::to_string(y.x));
  }
  if (!model.safe(y.x)) return {{{y.x, y.k - 1}, 1.0}};

  std::vector<Transition> out;
  const auto row = base.row(y.x, u);
  for (StateId next = 0; next < static_cast<StateId>(row.size()); ++next) {
    if (row[next] > 0.0) out.push_back({{next, y.k - 1}, row[next]});
  }
  return out;
}

int reward(const ConfoundedMdpModel& model, AugmentedState y) {
  return (y.k == 0 && model.safe(y.x)) ? 1 : 0;
}

}  // namespace causalsafe
