#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace stackparse::num {

// Seeded 64-bit generator (std::mt19937_64, whose output sequence is fixed by
// the standard). Distributions are derived here rather than through
// <random>'s distribution classes, whose algorithms are implementation
// defined, so shuffles and initializations are identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection, n > 0.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace stackparse::num
