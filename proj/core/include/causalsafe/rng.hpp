#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace causalsafe {

/// One step of the splitmix64 generator; advances `state`.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a root seed and a path of
/// indices (e.g. {batch, trajectory}). The result depends only on the
/// arguments, so streams can be consumed in any order or on any thread.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = root;
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t index : path) {
    state = out ^ (index * 0xd1b54a32d192ed03ULL + 0x8bb84b93962eacc9ULL);
    out = splitmix64(state);
  }
  return out;
}

/// mt19937_64 with a portable uniform draw. std::uniform_real_distribution
/// is avoided since its output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Index drawn from a (normalized) probability vector.
  int sample(std::span<const double> probs) {
    const double r = uniform();
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      last_positive = static_cast<int>(i);
      acc += probs[i];
      if (r < acc) return last_positive;
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace causalsafe
