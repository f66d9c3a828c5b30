#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace focus {

// SplitMix64 finalizer; the mixing function behind every seeded stream.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Child seed for stream `index` of `master`. Folds, epochs and bags each get
// their own derived stream so reruns are bit-exact regardless of visit order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

// Counter-based generator: output n is mix64(key + n * golden). Pure integer
// arithmetic, so sequences are identical on every platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed)) {}

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  // Standard normal via Box-Muller (no cached second variate).
  double normal() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    shuffle(std::span<T>(items));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace focus
