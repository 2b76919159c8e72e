#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "modechain/seqspace.hpp"

namespace modechain {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr int kNumLayers = 2;

struct LstmDims {
  std::uint32_t vocab_size = 0;  // |Sigma|; the softmax has one extra pad class
  std::uint32_t embed_dim = 0;
  std::uint32_t hidden_size = 0;

  std::uint32_t output_size() const noexcept { return vocab_size + 1; }
  std::uint32_t layer_input(int layer) const noexcept { return layer == 0 ? embed_dim : hidden_size; }
  void validate() const;
  bool operator==(const LstmDims&) const = default;
};

// Gate blocks inside w_ih, w_hh and b are stacked in the fixed order
// (input, forget, cell, output), each hidden_size rows tall.
struct LstmLayerParams {
  Matrix w_ih;  // 4H x in
  Matrix w_hh;  // 4H x H
  Vector b;     // 4H
};

struct LstmParams {
  LstmDims dims;
  Matrix embed;  // (V+1) x E, one row per token including pad
  std::array<LstmLayerParams, kNumLayers> layers;
  Matrix out_proj;  // (V+1) x H
  Vector out_bias;  // V+1

  static LstmParams zeros(const LstmDims& dims);

  std::size_t parameter_count() const;
  bool all_finite() const;

  // Visits every tensor in the canonical (checkpoint) order:
  // embed, l0.w_ih, l0.w_hh, l0.b, l1.w_ih, l1.w_hh, l1.b, out_proj, out_bias.
  template <class F>
  void for_each_tensor(F&& fn) {
    fn(std::string_view("embed"), std::span<double>(embed.data(), embed.size()));
    for (int l = 0; l < kNumLayers; ++l) {
      auto& layer = layers[l];
      fn(l == 0 ? std::string_view("l0.w_ih") : std::string_view("l1.w_ih"),
         std::span<double>(layer.w_ih.data(), layer.w_ih.size()));
      fn(l == 0 ? std::string_view("l0.w_hh") : std::string_view("l1.w_hh"),
         std::span<double>(layer.w_hh.data(), layer.w_hh.size()));
      fn(l == 0 ? std::string_view("l0.b") : std::string_view("l1.b"),
         std::span<double>(layer.b.data(), layer.b.size()));
    }
    fn(std::string_view("out_proj"), std::span<double>(out_proj.data(), out_proj.size()));
    fn(std::string_view("out_bias"), std::span<double>(out_bias.data(), out_bias.size()));
  }

  template <class F>
  void for_each_tensor(F&& fn) const {
    const_cast<LstmParams*>(this)->for_each_tensor(
        [&](std::string_view name, std::span<double> t) { fn(name, std::span<const double>(t)); });
  }

  // Flat views in canonical order; handy for tests and finite differences.
  double& flat(std::size_t index);
  double flat(std::size_t index) const;
};

bool operator==(const LstmParams& a, const LstmParams& b);

// Deterministic init: every weight ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)]
// where fan_in is the input width of the matrix (1 for the embedding lookup,
// whose input is one-hot). Forget-gate biases start at +1, all other biases 0.
LstmParams init_params(const LstmDims& dims, std::uint64_t seed);

struct LstmState {
  std::array<Vector, kNumLayers> h;
  std::array<Vector, kNumLayers> c;

  static LstmState zeros(const LstmDims& dims);
};

struct StepOutput {
  Vector logits;  // V+1 entries, pad last
  LstmState state;
};

// One recurrence step: consume `token`, return the logits of the next token.
StepOutput step(const LstmParams& params, Token token, const LstmState& state);

// Row-per-hypothesis recurrent state used by exact evaluation and decoders.
struct StateBatch {
  std::array<Matrix, kNumLayers> h;
  std::array<Matrix, kNumLayers> c;

  static StateBatch zeros(const LstmDims& dims, Eigen::Index rows);
  Eigen::Index rows() const noexcept { return h[0].rows(); }
  // New batch whose row r is row parents[r] of this batch.
  StateBatch gather(std::span<const std::int64_t> parents) const;
};

// Feeds tokens[r] to row r of `states`, in place.
void advance(const LstmParams& params, std::span<const Token> tokens, StateBatch& states);

// Logits for each row (rows x (V+1)).
Matrix output_logits(const LstmParams& params, const StateBatch& states);

// Log-softmax over the V real tokens with the pad logit excluded.
Vector masked_log_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits, std::uint32_t vocab_size);
void masked_log_softmax_rows(const Matrix& logits, std::uint32_t vocab_size, Matrix& out);

// State after feeding the begin-of-sequence input (the eos token) at t = 0.
StateBatch initial_states(const LstmParams& params, Token bos, Eigen::Index rows);

// log p(seq) = sum_t log p(s_t | s_<t), pad excluded from each normalizer.
double sequence_log_prob(const LstmParams& params, const SpaceSpec& space, std::span<const Token> seq);

// Training batch: targets[r * cols + t] is the t-th token of row r; mask marks
// real positions (a prefix of each row). Inputs are derived: bos at t = 0,
// then the previous target.
struct Batch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Token> targets;
  std::vector<std::uint8_t> mask;

  Token target(std::size_t r, std::size_t t) const { return targets[r * cols + t]; }
  bool real(std::size_t r, std::size_t t) const { return mask[r * cols + t] != 0; }
  std::size_t real_count() const;
};

struct LossAndGrads {
  double loss = 0.0;  // mean NLL per real token
  LstmParams grads;
};

// Masked mean NLL (softmax over all V+1 classes) and its exact gradient by
// reverse-mode differentiation of the unrolled recurrence. Identical rows are
// evaluated once with a multiplicity weight.
LossAndGrads loss_and_grads(const LstmParams& params, const Batch& batch, Token bos);

// Forward-only version of the same loss.
double batch_loss(const LstmParams& params, const Batch& batch, Token bos);

}  // namespace modechain
