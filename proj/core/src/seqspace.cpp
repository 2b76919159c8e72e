#include "modechain/seqspace.hpp"

#include <string>

#include "modechain/error.hpp"

namespace modechain {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw ConfigError("sequence space size overflows 64-bit ids");
  }
  return out;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw ConfigError("sequence space size overflows 64-bit ids");
  }
  return out;
}

}  // namespace

void Vocab::validate() const {
  if (size < 2) {
    throw ConfigError("vocab_size must be >= 2 (got " + std::to_string(size) + ")");
  }
  if (eos_id >= size) {
    throw ConfigError("eos_id must be < vocab_size (got " + std::to_string(eos_id) + ")");
  }
}

void SpaceSpec::validate() const {
  vocab.validate();
  if (max_len < 1) {
    throw ConfigError("max_len must be >= 1");
  }
  (void)space_size(*this);
}

std::uint64_t level_width(const SpaceSpec& spec, std::uint32_t content_len) {
  std::uint64_t width = 1;
  for (std::uint32_t i = 0; i < content_len; ++i) {
    width = checked_mul(width, spec.vocab.content_count());
  }
  return width;
}

std::uint64_t level_offset(const SpaceSpec& spec, std::uint32_t content_len) {
  std::uint64_t offset = 0;
  std::uint64_t width = 1;
  for (std::uint32_t l = 0; l < content_len; ++l) {
    offset = checked_add(offset, width);
    if (l + 1 < content_len) width = checked_mul(width, spec.vocab.content_count());
  }
  return offset;
}

std::uint64_t space_size(const SpaceSpec& spec) {
  return level_offset(spec, spec.max_len);
}

void validate_sequence(const SpaceSpec& spec, std::span<const Token> seq) {
  if (seq.empty()) throw ValidationError("empty sequence (missing eos)");
  if (seq.size() > spec.max_len) {
    throw ValidationError("sequence longer than max_len (" + std::to_string(seq.size()) + " > " +
                          std::to_string(spec.max_len) + ")");
  }
  if (seq.back() != spec.vocab.eos_id) throw ValidationError("sequence does not end with eos");
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    if (seq[t] == spec.vocab.eos_id) throw ValidationError("interior eos at position " + std::to_string(t));
    if (seq[t] >= spec.vocab.size) {
      throw ValidationError("token " + std::to_string(seq[t]) + " outside the vocabulary");
    }
  }
}

SequenceId seq_to_id(const SpaceSpec& spec, std::span<const Token> seq) {
  validate_sequence(spec, seq);
  const auto content_len = static_cast<std::uint32_t>(seq.size() - 1);
  const std::uint64_t m = spec.vocab.content_count();
  std::uint64_t value = 0;
  for (std::uint32_t t = 0; t < content_len; ++t) {
    value = value * m + spec.vocab.content_index(seq[t]);
  }
  return level_offset(spec, content_len) + value;
}

std::uint32_t id_content_length(const SpaceSpec& spec, SequenceId id) {
  std::uint64_t offset = 0;
  std::uint64_t width = 1;
  for (std::uint32_t l = 0; l < spec.max_len; ++l) {
    if (id < offset + width) return l;
    offset += width;
    width *= spec.vocab.content_count();
  }
  throw ValidationError("sequence id " + std::to_string(id) + " out of range");
}

Sequence level_prefix(const SpaceSpec& spec, std::uint32_t content_len, std::uint64_t index) {
  const std::uint64_t m = spec.vocab.content_count();
  Sequence out(content_len);
  for (std::uint32_t t = content_len; t-- > 0;) {
    out[t] = spec.vocab.content_token(static_cast<std::uint32_t>(index % m));
    index /= m;
  }
  return out;
}

Sequence id_to_seq(const SpaceSpec& spec, SequenceId id) {
  const std::uint32_t len = id_content_length(spec, id);
  Sequence out = level_prefix(spec, len, id - level_offset(spec, len));
  out.push_back(spec.vocab.eos_id);
  return out;
}

std::vector<Sequence> level_prefixes(const SpaceSpec& spec, std::uint32_t content_len) {
  const std::uint64_t width = level_width(spec, content_len);
  std::vector<Sequence> out;
  out.reserve(width);
  for (std::uint64_t j = 0; j < width; ++j) out.push_back(level_prefix(spec, content_len, j));
  return out;
}

}  // namespace modechain
