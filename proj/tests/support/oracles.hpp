#pragma once

// Brute-force references shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "modechain/dists.hpp"
#include "modechain/modes.hpp"
#include "modechain/rng.hpp"

namespace modechain::oracle {

// Top-k set by full sort: ids strictly above the (k+1)-st largest value.
// k >= |Omega| yields the whole space, k == 0 the empty set.
inline std::set<SequenceId> full_sort_modes(const LogProbTable& t, std::uint64_t k) {
  std::set<SequenceId> out;
  if (k == 0) return out;
  if (k >= t.size()) {
    for (SequenceId id = 0; id < t.size(); ++id) out.insert(id);
    return out;
  }
  std::vector<double> sorted = t.values;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double threshold = sorted[k];
  for (SequenceId id = 0; id < t.size(); ++id) {
    if (t.values[id] > threshold) out.insert(id);
  }
  return out;
}

// Literal scan: the smallest k' with S_k(p) inside S_k'(q). Returns nullopt
// when no k' works, which happens exactly when a mode lies outside supp(q).
inline std::optional<std::uint64_t> scan_cost(const std::set<SequenceId>& modes, const LogProbTable& q) {
  for (std::uint64_t kp = 0; kp <= q.size(); ++kp) {
    const auto target = full_sort_modes(q, kp);
    if (std::includes(target.begin(), target.end(), modes.begin(), modes.end())) {
      // S_|Omega|(q) is all of Omega, zero-mass ids included; the paper counts
      // those as unrecoverable.
      bool supported = true;
      for (SequenceId id : modes) supported = supported && q.in_support(id);
      if (!supported) return std::nullopt;
      return kp;
    }
  }
  return std::nullopt;
}

// Random table over n ids drawn from a handful of integer weights, so exact
// ties and zero entries are common.
inline LogProbTable tied_table(std::uint64_t n, Rng& rng, int levels = 5, double zero_rate = 0.2) {
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& x : w) {
    x = rng.uniform() < zero_rate ? 0.0 : static_cast<double>(1 + rng.below(static_cast<std::uint64_t>(levels)));
    total += x;
  }
  if (total == 0.0) {
    w[0] = 1.0;
    total = 1.0;
  }
  LogProbTable t;
  t.values.reserve(n);
  for (double x : w) t.values.push_back(x > 0 ? std::log(x / total) : -std::numeric_limits<double>::infinity());
  t.normalized = true;
  return t;
}

// Continuous random table with full support.
inline LogProbTable smooth_table(std::uint64_t n, Rng& rng) {
  LogProbTable t;
  for (std::uint64_t i = 0; i < n; ++i) t.values.push_back(4.0 * rng.uniform());
  t.normalize();
  return t;
}

}  // namespace modechain::oracle
