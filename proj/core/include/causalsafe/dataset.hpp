#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "causalsafe/environments.hpp"
#include "causalsafe/model.hpp"

namespace causalsafe {

enum class DatasetForm {
  kRaw,        // visible states as logged
  kConverted,  // absorbed states: frozen after the first safety violation
};

/// One logged episode. All sequences have length H + 1; the final action
/// (and mediator) is recorded but never followed by a transition.
struct Episode {
  std::uint64_t seed = 0;
  std::vector<StateId> x;
  /// Remaining time H - t; populated in converted form only.
  std::vector<int> k;
  std::vector<ActionIndex> u;
  /// Empty when the environment has no mediator.
  std::vector<MediatorId> m;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct EpisodeDataset {
  DatasetForm form = DatasetForm::kRaw;
  int horizon = 0;
  std::vector<Episode> episodes;

  bool has_mediators() const;
  std::size_t num_steps() const;

  friend bool operator==(const EpisodeDataset&, const EpisodeDataset&) = default;
};

/// Logs `n_episodes` episodes from x0 under the latent-aware behavioral
/// policy. Each step draws w ~ P(w|x), u ~ pi_b(.|x,w), m ~ P(m|x,u) when a
/// mediator exists, then x' from the ground-truth kernel. The latent value
/// is never recorded. Episode i uses the stream derive_seed(seed, {i}), so
/// the output is identical for any thread count.
EpisodeDataset generate_offline(const ConfoundedMdpModel& model,
                                const TabularPolicy& behavioral,
                                const std::optional<MediatorModel>& mediator,
                                std::size_t n_episodes, StateId x0,
                                std::uint64_t seed, unsigned threads = 0);

EpisodeDataset generate_offline(const Environment& env, std::size_t n_episodes,
                                StateId x0, std::uint64_t seed,
                                unsigned threads = 0);

/// Absorbing conversion: x̂_0 = x_0, x̂_{t+1} = x_{t+1} while x̂_t is safe,
/// else x̂_{t+1} = x̂_t; k_t = H - t. Actions and mediators are copied.
/// Throws FormError if `raw` is already converted.
EpisodeDataset convert_dataset(const EpisodeDataset& raw,
                               const ConfoundedMdpModel& model);

/// JSON lines, one episode per line: {"seed":..,"x":[..],"u":[..]} with
/// optional "m" and, for converted datasets, "k". Integers only.
void write_jsonl(std::ostream& out, const EpisodeDataset& dataset);
EpisodeDataset read_jsonl(std::istream& in);

void write_jsonl(const std::filesystem::path& path, const EpisodeDataset& dataset);
EpisodeDataset read_jsonl(const std::filesystem::path& path);

}  // namespace causalsafe
