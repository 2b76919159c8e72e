#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace modechain {

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based keyed PRF: a pure function of (key, counter).
constexpr std::uint64_t keyed_bits(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(mix64(key ^ 0x6a09e667f3bcc909ULL) ^ mix64(counter + 0x3c6ef372fe94f82bULL));
}

// Maps 64 random bits to a double strictly inside (0, 1).
constexpr double bits_to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

// Sub-seed for a named pipeline stage. Labels are part of the reproducibility
// contract; changing one changes every downstream artifact.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept;

// Seeded generator with platform-independent draws (std distributions are
// implementation-defined, so they are avoided).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace modechain
