#pragma once

#include <cstdint>
#include <vector>

namespace earlystop {

// Counter-based SplitMix64 stream keyed by (seed, trial, stream).
//
// Output i of a stream is mix64(key + (i + 1) * golden_gamma), so any trial's
// draws depend only on its key, never on scheduling order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream);

  std::uint64_t next_u64();
  // Uniform on (0, 1): 53 random bits, never exactly 0 or 1.
  double uniform();
  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z);

// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> random_permutation(std::size_t n, CounterRng& rng);

// Stream identifiers used by the experiment harness.
enum class RngStream : std::uint64_t { kNoise = 1, kDesign = 2, kHoldoutSplit = 3 };

}  // namespace earlystop
