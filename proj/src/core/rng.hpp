#pragma once

#include <cstdint>
#include <string_view>

namespace diffanon {

// Deterministic 64-bit-state generator (splitmix64). The whole generator
// state is a single u64, which is what checkpoints persist; draws are
// identical across platforms with IEEE doubles.
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive range. Modulo bias is negligible for the ranges used here.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() %
                                 static_cast<std::uint64_t>(hi - lo + 1));
  }

  // Box-Muller, cosine branch only, so the generator carries no hidden
  // spare-sample state beyond the u64.
  double gaussian();
};

// Labeled seed derivation: every stochastic component gets
// derive_seed(global_seed, "component/name"). FNV-1a over the label,
// mixed with the global seed through one splitmix round.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view label);

}  // namespace diffanon
