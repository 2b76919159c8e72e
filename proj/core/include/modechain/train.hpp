#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "modechain/adam.hpp"
#include "modechain/dists.hpp"
#include "modechain/lstm.hpp"
#include "modechain/rng.hpp"
#include "modechain/seqspace.hpp"

namespace modechain {

struct TrainConfig {
  std::uint32_t hidden_size = 64;
  std::uint32_t embed_dim = 0;  // 0: same as hidden_size
  double lr = 1e-4;
  std::uint32_t batch_size = 256;
  std::uint32_t val_interval = 50;
  std::uint32_t patience = 5;
  std::uint64_t max_steps = 4000;
  std::uint64_t seed = 0;

  void validate() const;
  LstmDims dims(const Vocab& vocab) const;
};

struct HistoryEntry {
  std::uint64_t step = 0;
  double train_loss = 0.0;  // mean batch loss since the previous validation
  double val_loss = 0.0;
  bool operator==(const HistoryEntry&) const = default;
};

enum class StopReason { early_stop, max_steps };
std::string_view to_string(StopReason reason);

struct TrainResult {
  LstmParams best_params;
  std::uint64_t best_step = 0;
  double best_val_loss = 0.0;
  std::vector<HistoryEntry> history;
  StopReason stopped_reason = StopReason::max_steps;
  std::uint64_t steps_run = 0;
};

// Pads sequences (given by id) into one batch; pad fills past each length.
Batch make_batch(const SpaceSpec& space, std::span<const SequenceId> ids);

// Cycles shuffled epochs over the multiset (each id repeated by its count).
// The last batch of an epoch may be short.
class BatchStream {
 public:
  BatchStream(const Dataset& data, const SpaceSpec& space, std::uint32_t batch_size, std::uint64_t seed);

  Batch next();
  std::uint64_t epoch() const noexcept { return epoch_; }
  // Ids of the batch next() would build, without consuming it.
  std::span<const SequenceId> peek_ids();

 private:
  void reshuffle();

  SpaceSpec space_;
  std::uint32_t batch_size_;
  std::vector<SequenceId> pool_;
  std::size_t cursor_ = 0;
  std::uint64_t epoch_ = 0;
  Rng rng_;
};

// Mean per-token NLL over the whole multiset.
double dataset_loss(const LstmParams& params, const Dataset& data, const SpaceSpec& space);

// Stops after `patience` consecutive validations without a new strict minimum.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::uint32_t patience) : patience_(patience) {}

  // Returns true when val_loss is a new best.
  bool observe(double val_loss);
  bool should_stop() const noexcept { return rounds_without_improvement_ >= patience_; }
  double best() const noexcept { return best_; }

 private:
  std::uint32_t patience_;
  std::uint32_t rounds_without_improvement_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

// Maximum-likelihood training with Adam, periodic full validation, early
// stopping and best-checkpoint selection.
TrainResult train_model(const Dataset& train, const Dataset& valid, const TrainConfig& cfg, const SpaceSpec& space);

// "step,train_loss,val_loss".
std::string history_to_csv(std::span<const HistoryEntry> history);
std::vector<HistoryEntry> history_from_csv(std::string_view text);

}  // namespace modechain
