#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modechain/lstm.hpp"
#include "modechain/seqspace.hpp"

namespace modechain {

enum class DecodeKind { beam, ancestral };

std::string_view to_string(DecodeKind kind);
DecodeKind parse_decode_kind(std::string_view name);

struct DecodeConfig {
  DecodeKind kind = DecodeKind::beam;
  std::uint64_t width_or_unique = 1;  // beam width, or unique samples wanted
  std::uint64_t max_attempts = 0;     // ancestral draw cap; 0 means 1000 * width_or_unique
  std::uint64_t seed = 0;             // ancestral only

  std::uint64_t attempt_cap() const noexcept { return max_attempts ? max_attempts : 1000 * width_or_unique; }
  void validate() const;
};

struct ScoredSequence {
  SequenceId id = 0;
  double log_prob = 0.0;  // log p_theta(s), not renormalized over Omega
  bool operator==(const ScoredSequence&) const = default;
};

// Width-W beam search without length normalization. Finished hypotheses stay
// in the beam and compete with live ones; hypotheses that would exceed the
// length cap are dropped. Results are sorted by log-prob descending, ties by
// id ascending.
std::vector<ScoredSequence> beam_search(const LstmParams& params, const SpaceSpec& space, const DecodeConfig& cfg);

struct AncestralResult {
  std::vector<SequenceId> ids;  // unique sequences in first-seen order
  std::uint64_t attempts = 0;   // draws consumed, rejected ones included
  std::uint64_t rejected = 0;   // draws that hit the length cap without eos
  bool exhausted = false;       // stopped at the attempt cap with too few uniques
};

// Ancestral sampling (pad masked) until width_or_unique distinct sequences
// are found or the attempt cap is reached.
AncestralResult ancestral_unique(const LstmParams& params, const SpaceSpec& space, const DecodeConfig& cfg);

// Runs the configured decoder and scores its output, best first.
std::vector<ScoredSequence> decode(const LstmParams& params, const SpaceSpec& space, const DecodeConfig& cfg);

// "rank,id,model_log_prob" with 17 significant digits.
std::string decoded_to_csv(std::span<const ScoredSequence> decoded);

}  // namespace modechain
