#include "modechain/rng.hpp"

namespace modechain {

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
  return fnv1a64(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
  return keyed_bits(mix64(master), fnv1a64(label));
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

}  // namespace modechain
