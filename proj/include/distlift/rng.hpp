#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace distlift {

// Seeded random stream with a fixed bit-to-double mapping so that sampled
// values are identical across platforms and standard libraries.  All
// randomness in the project flows through this type; nothing uses
// std::*_distribution (their algorithms are implementation-defined).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t raw();                      // full 64-bit draw
  double uniform();                         // [0, 1)
  double uniform(double lo, double hi);     // [lo, hi)
  double gaussian();                        // standard normal
  double gaussian(double mean, double sigma);
  std::size_t uniform_index(std::size_t n); // unbiased draw from [0, n)

  std::uint64_t seed() const { return seed_; }

  // Independent stream derived from this stream's seed and a salt; the
  // parent's state is not consumed.
  RngStream derive(std::uint64_t salt) const;

  // Exact state capture/restore, used by training checkpoints.
  std::string save_state() const;
  void load_state(const std::string& state);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
};

// splitmix64 mixing step; used to spread user seeds and derive sub-streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace distlift
