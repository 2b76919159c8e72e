#include "modechain/train.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "modechain/csv.hpp"
#include "modechain/error.hpp"

namespace modechain {

void TrainConfig::validate() const {
  if (hidden_size < 1) throw ConfigError("train.hidden_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be a finite value >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (val_interval < 1) throw ConfigError("train.val_interval must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (max_steps < 1) throw ConfigError("train.max_steps must be >= 1");
}

LstmDims TrainConfig::dims(const Vocab& vocab) const {
  return LstmDims{vocab.size, embed_dim ? embed_dim : hidden_size, hidden_size};
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::early_stop ? "early_stop" : "max_steps";
}

Batch make_batch(const SpaceSpec& space, std::span<const SequenceId> ids) {
  std::vector<Sequence> seqs;
  seqs.reserve(ids.size());
  std::size_t cols = 0;
  for (SequenceId id : ids) {
    seqs.push_back(id_to_seq(space, id));
    cols = std::max(cols, seqs.back().size());
  }
  Batch b;
  b.rows = seqs.size();
  b.cols = cols;
  b.targets.assign(b.rows * cols, space.vocab.pad_id());
  b.mask.assign(b.rows * cols, 0);
  for (std::size_t r = 0; r < seqs.size(); ++r) {
    for (std::size_t t = 0; t < seqs[r].size(); ++t) {
      b.targets[r * cols + t] = seqs[r][t];
      b.mask[r * cols + t] = 1;
    }
  }
  return b;
}

BatchStream::BatchStream(const Dataset& data, const SpaceSpec& space, std::uint32_t batch_size, std::uint64_t seed)
    : space_(space), batch_size_(batch_size), rng_(seed) {
  if (data.total == 0) throw ValidationError("cannot batch an empty dataset");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  pool_.reserve(data.total);
  for (const auto& [id, count] : data.counts) pool_.insert(pool_.end(), count, id);
  reshuffle();
}

void BatchStream::reshuffle() {
  rng_.shuffle(std::span<SequenceId>(pool_));
  cursor_ = 0;
}

std::span<const SequenceId> BatchStream::peek_ids() {
  if (cursor_ >= pool_.size()) {
    ++epoch_;
    reshuffle();
  }
  const std::size_t n = std::min<std::size_t>(batch_size_, pool_.size() - cursor_);
  return std::span<const SequenceId>(pool_).subspan(cursor_, n);
}

Batch BatchStream::next() {
  const auto ids = peek_ids();
  Batch b = make_batch(space_, ids);
  cursor_ += ids.size();
  return b;
}

double dataset_loss(const LstmParams& params, const Dataset& data, const SpaceSpec& space) {
  std::vector<SequenceId> ids;
  ids.reserve(data.total);
  for (const auto& [id, count] : data.counts) ids.insert(ids.end(), count, id);
  return batch_loss(params, make_batch(space, ids), space.vocab.eos_id);
}

bool EarlyStopping::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    rounds_without_improvement_ = 0;
    return true;
  }
  ++rounds_without_improvement_;
  return false;
}

TrainResult train_model(const Dataset& train, const Dataset& valid, const TrainConfig& cfg, const SpaceSpec& space) {
  cfg.validate();
  space.validate();
  if (valid.total == 0) throw ValidationError("validation set is empty");

  LstmParams params = init_params(cfg.dims(space.vocab), derive_seed(cfg.seed, "init"));
  AdamState adam = AdamState::fresh(params.dims, AdamConfig{.lr = cfg.lr});
  BatchStream batches(train, space, cfg.batch_size, derive_seed(cfg.seed, "shuffle"));
  EarlyStopping stopper(cfg.patience);
  const Token bos = space.vocab.eos_id;

  TrainResult result;
  result.best_params = params;
  double interval_loss = 0.0;
  std::uint64_t interval_steps = 0;
  for (std::uint64_t step = 1; step <= cfg.max_steps; ++step) {
    const Batch batch = batches.next();
    LossAndGrads lg = loss_and_grads(params, batch, bos);
    if (!std::isfinite(lg.loss)) throw NumericError("non-finite training loss at step " + std::to_string(step));
    adam_update(params, lg.grads, adam);
    interval_loss += lg.loss;
    ++interval_steps;
    result.steps_run = step;

    if (step % cfg.val_interval == 0 || step == cfg.max_steps) {
      const double val = dataset_loss(params, valid, space);
      if (!std::isfinite(val)) throw NumericError("non-finite validation loss at step " + std::to_string(step));
      result.history.push_back({step, interval_loss / static_cast<double>(interval_steps), val});
      interval_loss = 0.0;
      interval_steps = 0;
      if (stopper.observe(val)) {
        result.best_params = params;
        result.best_step = step;
        result.best_val_loss = val;
      }
      if (stopper.should_stop()) {
        result.stopped_reason = StopReason::early_stop;
        return result;
      }
    }
  }
  result.stopped_reason = StopReason::max_steps;
  return result;
}

std::string history_to_csv(std::span<const HistoryEntry> history) {
  std::string out = "step,train_loss,val_loss\n";
  for (const auto& h : history) {
    out += std::to_string(h.step) + "," + format_real(h.train_loss) + "," + format_real(h.val_loss) + "\n";
  }
  return out;
}

std::vector<HistoryEntry> history_from_csv(std::string_view text) {
  std::vector<HistoryEntry> out;
  std::size_t pos = text.find('\n');
  if (pos == std::string_view::npos) return out;
  ++pos;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;
    HistoryEntry h;
    char* rest = nullptr;
    h.step = std::strtoull(line.c_str(), &rest, 10);
    if (*rest != ',') throw ValidationError("history csv: malformed line");
    h.train_loss = std::strtod(rest + 1, &rest);
    if (*rest != ',') throw ValidationError("history csv: malformed line");
    h.val_loss = std::strtod(rest + 1, &rest);
    out.push_back(h);
  }
  return out;
}

}  // namespace modechain
