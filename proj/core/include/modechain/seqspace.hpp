#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace modechain {

using Token = std::uint32_t;
using SequenceId = std::uint64_t;

// Token alphabet. Every token except eos is a content token; pad sits one
// past the alphabet and only ever appears in training batches.
struct Vocab {
  std::uint32_t size = 0;
  Token eos_id = 0;

  Token pad_id() const noexcept { return size; }
  std::uint32_t content_count() const noexcept { return size - 1; }

  // Content index in [0, m) <-> token id (eos is skipped).
  Token content_token(std::uint32_t index) const noexcept {
    return index < eos_id ? index : index + 1;
  }
  std::uint32_t content_index(Token token) const noexcept {
    return token < eos_id ? token : token - 1;
  }

  void validate() const;
};

// The finite space Omega: all eos-terminated sequences of at most max_len
// tokens (eos included), i.e. content length l in [0, max_len - 1].
struct SpaceSpec {
  Vocab vocab;
  std::uint32_t max_len = 0;

  void validate() const;
};

using Sequence = std::vector<Token>;

// |Omega| = sum_{l < max_len} m^l. Throws ConfigError on 64-bit overflow.
std::uint64_t space_size(const SpaceSpec& spec);

// First id of the block of sequences with content length l.
std::uint64_t level_offset(const SpaceSpec& spec, std::uint32_t content_len);

// m^l, the number of content prefixes of length l.
std::uint64_t level_width(const SpaceSpec& spec, std::uint32_t content_len);

// Ids are ordered by content length, then lexicographically by content.
SequenceId seq_to_id(const SpaceSpec& spec, std::span<const Token> seq);
Sequence id_to_seq(const SpaceSpec& spec, SequenceId id);

// Content length of the sequence with the given id.
std::uint32_t id_content_length(const SpaceSpec& spec, SequenceId id);

// Checks the Sequence invariants, throwing ValidationError with a reason.
void validate_sequence(const SpaceSpec& spec, std::span<const Token> seq);

// All m^l content prefixes of length l in lexicographic order. The child
// with content index i of the prefix at level index j sits at j * m + i.
std::vector<Sequence> level_prefixes(const SpaceSpec& spec, std::uint32_t content_len);

// The level-l prefix with the given level index.
Sequence level_prefix(const SpaceSpec& spec, std::uint32_t content_len, std::uint64_t index);

}  // namespace modechain
