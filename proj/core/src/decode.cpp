#include "modechain/decode.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "modechain/csv.hpp"
#include "modechain/error.hpp"
#include "modechain/log.hpp"
#include "modechain/rng.hpp"

namespace modechain {

std::string_view to_string(DecodeKind kind) { return kind == DecodeKind::beam ? "beam" : "ancestral"; }

DecodeKind parse_decode_kind(std::string_view name) {
  if (name == "beam") return DecodeKind::beam;
  if (name == "ancestral") return DecodeKind::ancestral;
  throw ConfigError("unknown decoder '" + std::string(name) + "' (expected beam or ancestral)");
}

void DecodeConfig::validate() const {
  if (width_or_unique < 1) throw ConfigError("decoder width must be >= 1");
  if (attempt_cap() < width_or_unique) throw ConfigError("max_attempts must be >= the number of unique samples");
}

namespace {

struct Candidate {
  double log_prob;
  SequenceId key;  // id of content + eos; orders ties
  bool finished;
  std::int64_t parent;  // live row that produced it, -1 for carried-over finished
  Token token;
  std::size_t finished_index;  // into the carried finished list when parent < 0
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.key != b.key) return a.key < b.key;
  return a.finished && !b.finished;
}

void check_model(const LstmParams& params, const SpaceSpec& space) {
  space.validate();
  if (params.dims.vocab_size != space.vocab.size) throw ValidationError("model vocabulary does not match space");
}

}  // namespace

std::vector<ScoredSequence> beam_search(const LstmParams& params, const SpaceSpec& space, const DecodeConfig& cfg) {
  cfg.validate();
  if (cfg.kind != DecodeKind::beam) throw ConfigError("beam_search called with a non-beam config");
  check_model(params, space);

  const std::uint64_t width = cfg.width_or_unique;
  const std::uint32_t m = space.vocab.content_count();
  const Token eos = space.vocab.eos_id;

  std::vector<ScoredSequence> finished;
  std::vector<std::vector<Token>> live_content(1);
  std::vector<double> live_lp(1, 0.0);
  StateBatch states = initial_states(params, eos, 1);

  std::vector<Candidate> pool;
  Matrix lp;
  for (std::uint32_t content_len = 0; !live_content.empty(); ++content_len) {
    masked_log_softmax_rows(output_logits(params, states), space.vocab.size, lp);
    pool.clear();
    for (std::size_t i = 0; i < finished.size(); ++i) {
      pool.push_back({finished[i].log_prob, finished[i].id, true, -1, 0, i});
    }
    const bool can_extend = content_len + 1 <= space.max_len - 1;
    std::vector<Token> seq;
    for (std::size_t r = 0; r < live_content.size(); ++r) {
      seq = live_content[r];
      seq.push_back(eos);
      pool.push_back({live_lp[r] + lp(static_cast<Eigen::Index>(r), eos), seq_to_id(space, seq), true,
                      static_cast<std::int64_t>(r), eos, 0});
      if (!can_extend) continue;
      for (std::uint32_t c = 0; c < m; ++c) {
        const Token tok = space.vocab.content_token(c);
        seq = live_content[r];
        seq.push_back(tok);
        seq.push_back(eos);
        pool.push_back({live_lp[r] + lp(static_cast<Eigen::Index>(r), tok), seq_to_id(space, seq), false,
                        static_cast<std::int64_t>(r), tok, 0});
      }
    }
    const std::size_t keep = std::min<std::size_t>(pool.size(), width);
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), better);

    std::vector<ScoredSequence> next_finished;
    std::vector<std::vector<Token>> next_content;
    std::vector<double> next_lp;
    std::vector<std::int64_t> parents;
    std::vector<Token> tokens;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = pool[i];
      if (c.finished) {
        next_finished.push_back(c.parent < 0 ? finished[c.finished_index] : ScoredSequence{c.key, c.log_prob});
      } else {
        std::vector<Token> content = live_content[static_cast<std::size_t>(c.parent)];
        content.push_back(c.token);
        next_content.push_back(std::move(content));
        next_lp.push_back(c.log_prob);
        parents.push_back(c.parent);
        tokens.push_back(c.token);
      }
    }
    finished = std::move(next_finished);
    live_content = std::move(next_content);
    live_lp = std::move(next_lp);
    if (!live_content.empty()) {
      states = states.gather(parents);
      advance(params, tokens, states);
    }
  }
  if (finished.empty()) throw Error("beam search finished no sequence within the length cap");
  std::sort(finished.begin(), finished.end(), [](const ScoredSequence& a, const ScoredSequence& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.id < b.id;
  });
  return finished;
}

AncestralResult ancestral_unique(const LstmParams& params, const SpaceSpec& space, const DecodeConfig& cfg) {
  cfg.validate();
  if (cfg.kind != DecodeKind::ancestral) throw ConfigError("ancestral_unique called with a non-ancestral config");
  check_model(params, space);

  const std::uint64_t wanted = cfg.width_or_unique;
  const std::uint64_t cap = cfg.attempt_cap();
  const Token eos = space.vocab.eos_id;
  const std::uint32_t vocab = space.vocab.size;
  Rng rng(cfg.seed);

  AncestralResult out;
  std::unordered_set<SequenceId> seen;
  Matrix lp;
  while (out.ids.size() < wanted && out.attempts < cap) {
    const std::uint64_t need = wanted - out.ids.size();
    const std::uint64_t batch = std::min<std::uint64_t>(cap - out.attempts, std::clamp<std::uint64_t>(4 * need, 16, 1024));

    std::vector<std::vector<Token>> content(batch);
    std::vector<int> status(batch, 0);  // 0 running, 1 accepted, -1 rejected
    std::vector<std::int64_t> rows(batch);
    for (std::uint64_t r = 0; r < batch; ++r) rows[r] = static_cast<std::int64_t>(r);
    StateBatch states = initial_states(params, eos, static_cast<Eigen::Index>(batch));

    for (std::uint32_t content_len = 0; !rows.empty(); ++content_len) {
      masked_log_softmax_rows(output_logits(params, states), vocab, lp);
      std::vector<std::int64_t> keep_rows;
      std::vector<std::int64_t> keep_local;
      std::vector<Token> tokens;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double u = rng.uniform();
        double acc = 0.0;
        Token tok = vocab - 1;
        for (Token t = 0; t < vocab; ++t) {
          acc += std::exp(lp(static_cast<Eigen::Index>(i), t));
          if (u < acc) {
            tok = t;
            break;
          }
        }
        const auto r = static_cast<std::size_t>(rows[i]);
        if (tok == eos) {
          status[r] = 1;
        } else if (content_len + 1 > space.max_len - 1) {
          status[r] = -1;
        } else {
          content[r].push_back(tok);
          keep_rows.push_back(rows[i]);
          keep_local.push_back(static_cast<std::int64_t>(i));
          tokens.push_back(tok);
        }
      }
      rows = std::move(keep_rows);
      if (!rows.empty()) {
        states = states.gather(keep_local);
        advance(params, tokens, states);
      }
    }

    for (std::uint64_t r = 0; r < batch && out.ids.size() < wanted; ++r) {
      ++out.attempts;
      if (status[r] < 0) {
        ++out.rejected;
        continue;
      }
      content[r].push_back(eos);
      const SequenceId id = seq_to_id(space, content[r]);
      if (seen.insert(id).second) out.ids.push_back(id);
    }
  }
  if (out.ids.empty()) throw Error("ancestral sampling accepted no sequence in " + std::to_string(out.attempts) + " draws");
  if (out.ids.size() < wanted) {
    out.exhausted = true;
    log_warn("ancestral sampling stopped at the attempt cap (" + std::to_string(cap) + ") with " +
             std::to_string(out.ids.size()) + " of " + std::to_string(wanted) + " unique sequences");
  }
  return out;
}

std::vector<ScoredSequence> decode(const LstmParams& params, const SpaceSpec& space, const DecodeConfig& cfg) {
  if (cfg.kind == DecodeKind::beam) return beam_search(params, space, cfg);
  const AncestralResult sampled = ancestral_unique(params, space, cfg);
  std::vector<ScoredSequence> out;
  out.reserve(sampled.ids.size());
  for (SequenceId id : sampled.ids) {
    const Sequence seq = id_to_seq(space, id);
    out.push_back({id, sequence_log_prob(params, space, seq)});
  }
  std::sort(out.begin(), out.end(), [](const ScoredSequence& a, const ScoredSequence& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.id < b.id;
  });
  return out;
}

std::string decoded_to_csv(std::span<const ScoredSequence> decoded) {
  std::string out = "rank,id,model_log_prob\n";
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    out += std::to_string(i + 1) + "," + std::to_string(decoded[i].id) + "," + format_real(decoded[i].log_prob) + "\n";
  }
  return out;
}

}  // namespace modechain
