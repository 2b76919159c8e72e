#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "modechain/decode.hpp"
#include "modechain/dists.hpp"
#include "modechain/error.hpp"
#include "modechain/lstm.hpp"
#include "modechain/seqspace.hpp"

using namespace modechain;

namespace {

const SpaceSpec kSpace{Vocab{3, 2}, 4};  // |Omega| = 15

LstmParams model(std::uint64_t seed, const SpaceSpec& space = kSpace) {
  LstmParams p = init_params(LstmDims{space.vocab.size, 6, 6}, seed);
  p.out_proj *= 3.0;  // sharper conditionals than the raw init
  return p;
}

// Output layer ignores the state and puts all mass on eos.
LstmParams eos_only(const SpaceSpec& space) {
  LstmParams p = init_params(LstmDims{space.vocab.size, 4, 4}, 1);
  p.out_proj.setZero();
  p.out_bias.setZero();
  p.out_bias(space.vocab.eos_id) = 1000.0;
  return p;
}

DecodeConfig beam(std::uint64_t w) { return DecodeConfig{DecodeKind::beam, w, 0, 0}; }
DecodeConfig anc(std::uint64_t n, std::uint64_t seed, std::uint64_t cap = 0) {
  return DecodeConfig{DecodeKind::ancestral, n, cap, seed};
}

}  // namespace

TEST(DecodeConfig, Validation) {
  EXPECT_THROW(beam(0).validate(), ConfigError);
  EXPECT_THROW(anc(5, 0, 4).validate(), ConfigError);
  EXPECT_EQ(anc(5, 0).attempt_cap(), 5000u);
  EXPECT_EQ(parse_decode_kind("beam"), DecodeKind::beam);
  EXPECT_EQ(parse_decode_kind("ancestral"), DecodeKind::ancestral);
  EXPECT_THROW(parse_decode_kind("greedy"), ConfigError);
}

TEST(Beam, WideBeamReturnsTheExhaustiveRanking) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const LstmParams p = model(seed);
    const LogProbTable t = model_table(p, kSpace);
    const auto out = beam_search(p, kSpace, beam(space_size(kSpace)));
    ASSERT_EQ(out.size(), space_size(kSpace));
    std::vector<SequenceId> ranked(t.size());
    for (SequenceId i = 0; i < t.size(); ++i) ranked[i] = i;
    std::stable_sort(ranked.begin(), ranked.end(), [&](SequenceId a, SequenceId b) { return t.values[a] > t.values[b]; });
    for (std::size_t r = 0; r < out.size(); ++r) {
      ASSERT_EQ(out[r].id, ranked[r]);
      ASSERT_NEAR(out[r].log_prob, sequence_log_prob(p, kSpace, id_to_seq(kSpace, out[r].id)), 1e-12);
    }
  }
}

TEST(Beam, NarrowBeamsReturnValidSortedSequences) {
  const SpaceSpec space{Vocab{4, 3}, 6};
  const LstmParams p = model(4, space);
  for (std::uint64_t w : {1, 2, 5, 20}) {
    const auto out = beam_search(p, space, beam(w));
    ASSERT_FALSE(out.empty());
    ASSERT_LE(out.size(), w);
    std::set<SequenceId> ids;
    for (std::size_t i = 0; i < out.size(); ++i) {
      ASSERT_LT(out[i].id, space_size(space));
      ASSERT_TRUE(ids.insert(out[i].id).second);
      if (i > 0) ASSERT_GE(out[i - 1].log_prob, out[i].log_prob);
    }
    EXPECT_EQ(beam_search(p, space, beam(w)), out);
  }
}

TEST(Beam, WidthOneIsGreedy) {
  const SpaceSpec space{Vocab{4, 3}, 6};
  for (std::uint64_t seed : {5, 6, 7, 8}) {
    const LstmParams p = model(seed, space);
    Sequence greedy;
    LstmState s = LstmState::zeros(p.dims);
    Token input = space.vocab.eos_id;
    bool finished = false;
    for (std::uint32_t t = 0; t < space.max_len; ++t) {
      StepOutput o = step(p, input, s);
      const Vector lp = masked_log_softmax(o.logits.transpose(), space.vocab.size);
      Eigen::Index best;
      lp.maxCoeff(&best);
      greedy.push_back(static_cast<Token>(best));
      if (static_cast<Token>(best) == space.vocab.eos_id) {
        finished = true;
        break;
      }
      s = o.state;
      input = static_cast<Token>(best);
    }
    if (!finished) continue;  // greedy path runs past the length cap
    const auto out = beam_search(p, space, beam(1));
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].id, seq_to_id(space, greedy));
    // A wider beam never finds a worse best sequence.
    EXPECT_GE(beam_search(p, space, beam(8))[0].log_prob, out[0].log_prob);
  }
}

TEST(Beam, CertainEosYieldsTheEmptySequence) {
  const auto out = beam_search(eos_only(kSpace), kSpace, beam(4));
  ASSERT_FALSE(out.empty());
  EXPECT_EQ(out[0].id, 0u);
  EXPECT_EQ(out[0].log_prob, 0.0);
}

TEST(Ancestral, DeterministicGivenSeed) {
  const LstmParams p = model(9);
  const auto a = ancestral_unique(p, kSpace, anc(6, 42));
  const auto b = ancestral_unique(p, kSpace, anc(6, 42));
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_EQ(a.attempts, b.attempts);
  EXPECT_EQ(a.ids.size(), 6u);
  EXPECT_FALSE(a.exhausted);
  std::set<SequenceId> uniq(a.ids.begin(), a.ids.end());
  EXPECT_EQ(uniq.size(), a.ids.size());
  for (SequenceId id : a.ids) EXPECT_LT(id, space_size(kSpace));
}

TEST(Ancestral, DegenerateModelExhaustsWithAWarning) {
  const LstmParams p = eos_only(kSpace);
  ::testing::internal::CaptureStderr();
  const auto r = ancestral_unique(p, kSpace, anc(2, 1, 50));
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(r.ids, (std::vector<SequenceId>{0}));
  EXPECT_EQ(r.attempts, 50u);
  EXPECT_TRUE(r.exhausted);
  EXPECT_NE(err.find("attempt cap"), std::string::npos) << err;
}

TEST(Ancestral, SingleDrawFrequenciesMatchTheModel) {
  const SpaceSpec space{Vocab{2, 1}, 3};  // <eos>, <a,eos>, <a,a,eos>
  LstmParams p = init_params(LstmDims{2, 3, 3}, 11);
  p.out_bias(1) -= 0.7;
  const LogProbTable t = model_table(p, space);
  ASSERT_EQ(t.size(), 3u);
  const int reps = 100000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < reps; ++i) {
    const auto r = ancestral_unique(p, space, anc(1, static_cast<std::uint64_t>(i)));
    ASSERT_EQ(r.ids.size(), 1u);
    ++counts[r.ids[0]];
  }
  for (SequenceId id = 0; id < 3; ++id) {
    const double q = std::exp(t.values[id]);
    const double sd = std::sqrt(reps * q * (1 - q));
    EXPECT_LE(std::abs(counts[id] - reps * q), 3 * sd) << "id " << id << " p=" << q;
  }
}

TEST(Decode, ScoresAncestralOutputAndFormatsCsv) {
  const LstmParams p = model(12);
  const auto out = decode(p, kSpace, anc(4, 3));
  ASSERT_EQ(out.size(), 4u);
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_GE(out[i - 1].log_prob, out[i].log_prob);
  const std::string csv = decoded_to_csv(out);
  EXPECT_EQ(csv.rfind("rank,id,model_log_prob\n1,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}
