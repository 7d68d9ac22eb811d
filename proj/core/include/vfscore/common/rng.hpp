#ifndef VFSCORE_COMMON_RNG_HPP_
#define VFSCORE_COMMON_RNG_HPP_

#include <cstdint>
#include <string_view>

namespace vfscore {

// Deterministic random source. All draws are derived from the seed through
// fixed arithmetic (no std::*_distribution, whose output is implementation
// defined), so a seed reproduces the same stream on any platform.
//
// Every component takes its own child generator via split(tag) from one root
// seed, so adding draws to one component never shifts another's stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; caches the paired draw.
  double normal();
  // Unbiased integer in [0, n) by rejection. n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Child generator keyed by (root seed, tag). Does not consume state.
  Rng split(std::string_view tag) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace vfscore

#endif  // VFSCORE_COMMON_RNG_HPP_
