#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "modechain/dists.hpp"

namespace modechain {

// Tie-aware k-mode set: every id whose value strictly exceeds the (k+1)-st
// largest value of the table. Ties at the threshold are all excluded, so the
// set may hold fewer than k members.
struct ModeSet {
  std::uint64_t k = 0;
  std::vector<SequenceId> members;  // ascending ids
  double threshold = 0.0;           // the (k+1)-st largest log-probability
};

struct RecoveryCost {
  std::uint64_t cost = 0;
  bool operator==(const RecoveryCost&) const = default;
};

// Some mode has zero mass under the target; carries the overlap instead.
struct RecoveryFailure {
  std::uint64_t overlap = 0;
  bool operator==(const RecoveryFailure&) const = default;
};

using RecoveryOutcome = std::variant<RecoveryCost, RecoveryFailure>;

inline bool is_failure(const RecoveryOutcome& o) { return std::holds_alternative<RecoveryFailure>(o); }

// Requires 1 <= k < |Omega|. Uses linear-time selection for the threshold.
ModeSet mode_set(const LogProbTable& table, std::uint64_t k);

// Smallest k' with S_k(p) ⊆ S_k'(q). For the tie-excluding definition this is
// the number of ids whose q-value is >= the lowest q-value among the modes.
// An empty mode set costs 0.
RecoveryOutcome recovery_cost(const ModeSet& source_modes, const LogProbTable& q);

// |S_k(p) ∩ supp(q)|.
std::uint64_t mode_overlap(const ModeSet& source_modes, const LogProbTable& q);

// ln(cost_emp / cost_model); nullopt when either side failed or is zero.
std::optional<double> cost_reduction_log_rate(const RecoveryOutcome& cost_emp, const RecoveryOutcome& cost_model);
double cost_reduction_log_rate(std::uint64_t cost_emp, std::uint64_t cost_model);

inline std::int64_t overlap_reduction(std::uint64_t overlap_truth, std::uint64_t overlap_model) {
  return static_cast<std::int64_t>(overlap_truth) - static_cast<std::int64_t>(overlap_model);
}

}  // namespace modechain
