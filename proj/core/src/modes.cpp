#include "modechain/modes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "modechain/error.hpp"

namespace modechain {

ModeSet mode_set(const LogProbTable& table, std::uint64_t k) {
  const std::uint64_t n = table.size();
  if (k < 1 || k >= n) {
    throw ConfigError("k must satisfy 1 <= k < |Omega| (k=" + std::to_string(k) + ", |Omega|=" + std::to_string(n) +
                      ")");
  }
  std::vector<double> scratch = table.values;
  auto nth = scratch.begin() + static_cast<std::ptrdiff_t>(k);
  std::nth_element(scratch.begin(), nth, scratch.end(), std::greater<>());

  ModeSet out;
  out.k = k;
  out.threshold = *nth;
  for (SequenceId id = 0; id < n; ++id) {
    if (table.values[id] > out.threshold) out.members.push_back(id);
  }
  return out;
}

std::uint64_t mode_overlap(const ModeSet& source_modes, const LogProbTable& q) {
  std::uint64_t overlap = 0;
  for (SequenceId id : source_modes.members) {
    if (id >= q.size()) throw ValidationError("mode id outside the target table");
    if (q.in_support(id)) ++overlap;
  }
  return overlap;
}

RecoveryOutcome recovery_cost(const ModeSet& source_modes, const LogProbTable& q) {
  if (source_modes.members.empty()) return RecoveryCost{0};
  const std::uint64_t overlap = mode_overlap(source_modes, q);
  if (overlap < source_modes.members.size()) return RecoveryFailure{overlap};

  double lowest = std::numeric_limits<double>::infinity();
  for (SequenceId id : source_modes.members) lowest = std::min(lowest, q.values[id]);
  const auto at_least = std::count_if(q.values.begin(), q.values.end(), [&](double v) { return v >= lowest; });
  return RecoveryCost{static_cast<std::uint64_t>(at_least)};
}

double cost_reduction_log_rate(std::uint64_t cost_emp, std::uint64_t cost_model) {
  if (cost_emp == 0 || cost_model == 0) throw ValidationError("log-rate needs both costs >= 1");
  return std::log(static_cast<double>(cost_emp) / static_cast<double>(cost_model));
}

std::optional<double> cost_reduction_log_rate(const RecoveryOutcome& cost_emp, const RecoveryOutcome& cost_model) {
  const auto* a = std::get_if<RecoveryCost>(&cost_emp);
  const auto* b = std::get_if<RecoveryCost>(&cost_model);
  if (!a || !b || a->cost == 0 || b->cost == 0) return std::nullopt;
  return cost_reduction_log_rate(a->cost, b->cost);
}

}  // namespace modechain
