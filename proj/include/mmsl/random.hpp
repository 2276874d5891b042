// SPDX-License-Identifier: Apache-2.0

#ifndef MMSL_RANDOM_HPP
#define MMSL_RANDOM_HPP

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

namespace mmsl {

/// Deterministic random stream (splitmix64). Every randomized operation in
/// the library draws from one of these, so a run is fully reproducible from
/// its seed. Streams are single-owner: hand one to exactly one consumer.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double next_real(double lo, double hi) { return lo + next_real() * (hi - lo); }

  /// Uniform in [0, n), unbiased (multiply-shift with rejection). n > 0.
  std::uint64_t next_below(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t cutoff = (0 - n) % n;  // 2^64 mod n
      while (low < cutoff) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform integer in [lo, hi], both ends inclusive.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    next_below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  /// k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
      std::swap(pool[i], pool[j]);
      picked.push_back(pool[i]);
    }
    return picked;
  }

 private:
  std::uint64_t state_;
};

/// Independent stream for item `index` of a run seeded with `seed`. The same
/// (seed, index) pair always yields the same stream, so per-item work can be
/// reordered or parallelized without changing any output.
inline RandomStream substream(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return RandomStream(z ^ (z >> 31));
}

}  // namespace mmsl

#endif  // MMSL_RANDOM_HPP
