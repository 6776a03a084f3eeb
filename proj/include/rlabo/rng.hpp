#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace rlabo {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seeded generator with a fixed bit-level contract.
///
/// The engine is mt19937_64, whose output sequence is fixed by the standard.
/// The std distributions are implementation-defined, so every real draw goes
/// through the 53-bit mapping below instead; this keeps runs bit-identical
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n). Rejection sampling, no modulo bias.
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return static_cast<std::size_t>(v % bound);
  }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::mt19937_64 engine_;
};

/// Seed of a named substream: splitmix64(splitmix64(root ^ fnv1a(tag)) + index).
///
/// Every random consumer (initial design, inner optimizer, action sampling,
/// parameter init, minibatch shuffling) draws from its own tagged substream,
/// so adding a consumer never shifts the draws of an existing one.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                    std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(root ^ fnv1a(tag)) + index);
}

inline Rng substream(std::uint64_t root, std::string_view tag, std::uint64_t index = 0) {
  return Rng(derive_seed(root, tag, index));
}

}  // namespace rlabo
