#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modechain/config.hpp"
#include "modechain/curves.hpp"
#include "modechain/decode.hpp"
#include "modechain/dists.hpp"
#include "modechain/modes.hpp"
#include "modechain/train.hpp"

namespace modechain {

// $MODECHAIN_CACHE_DIR, or ./.modechain-cache.
std::filesystem::path default_cache_dir();

// On-disk store for ground-truth tables and trained checkpoints, addressed
// by a hash of everything that determines them. Each artifact has a JSON
// sidecar holding its creation time (and, for checkpoints, the training
// history), so warm reruns never retrain.
class ArtifactCache {
 public:
  explicit ArtifactCache(std::filesystem::path root) : root_(std::move(root)) {}
  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path truth_path(std::uint64_t key) const;
  std::filesystem::path model_path(std::uint64_t key) const;

 private:
  std::filesystem::path root_;
};

struct ArtifactInfo {
  std::string path;     // empty when caching is off
  std::string created;  // UTC creation time of the file
  bool cached = false;  // loaded rather than computed by this run
};

// Ground truth, samples and the empirical table for one (alpha, N, seed).
struct DataStage {
  double alpha = 0.0;
  std::uint64_t n_train = 0;
  std::uint64_t seed = 0;
  std::uint64_t truth_key = 0;
  LogProbTable truth;
  Dataset train;
  Dataset valid;  // ceil(0.05 * N) draws, independent of train
  LogProbTable empirical;
  ArtifactInfo truth_artifact;
};

std::uint64_t validation_size(std::uint64_t n_train);

DataStage run_data_stage(const ExperimentConfig& cfg, double alpha, std::uint64_t n_train, std::uint64_t seed,
                         const ArtifactCache* cache);

struct ChainJob {
  double alpha = 0.0;
  std::uint64_t n_train = 0;
  std::uint32_t hidden_size = 0;
  std::uint64_t seed = 0;
};

struct KMetrics {
  std::uint64_t k = 0;
  std::uint64_t truth_modes = 0;  // |S_k(p*)|
  std::uint64_t emp_modes = 0;    // |S_k(p_emp)|
  RecoveryOutcome truth_emp;      // O_k(p* || p_emp)
  RecoveryOutcome truth_model;    // O_k(p* || p_model)
  RecoveryOutcome emp_model;      // O_k(p_emp || p_model)
  std::optional<double> log_rate;
};

struct DecoderKMetrics {
  std::uint64_t k = 0;
  std::uint64_t model_modes = 0;    // |S_k(p_model)|
  std::uint64_t overlap_model = 0;  // I_k(p_model || p_F)
  std::uint64_t overlap_truth = 0;  // I_k(p* || p_F)
  std::int64_t overlap_reduction = 0;
};

struct DecoderResult {
  DecodeKind kind = DecodeKind::beam;
  std::vector<SequenceId> decoded;  // ascending ids
  std::uint64_t attempts = 0;       // ancestral draws (0 for beam)
  bool exhausted = false;
  std::vector<DecoderKMetrics> per_k;
};

struct ChainResult {
  ChainJob job;
  std::uint64_t omega = 0;
  std::uint64_t train_distinct = 0;
  std::uint64_t emp_support = 0;
  std::vector<HistoryEntry> history;
  std::uint64_t best_step = 0;
  double best_val_loss = 0.0;
  StopReason stopped_reason = StopReason::max_steps;
  std::uint64_t steps_run = 0;
  std::vector<KMetrics> metrics;  // one per k_grid entry
  std::vector<DecoderResult> decoders;
  ArtifactInfo truth_artifact;
  ArtifactInfo model_artifact;
  double seconds = 0.0;
};

// One seeded pass through the chain p* -> p_emp -> p_model -> p_F. Stage
// failures surface as StageError naming the stage.
ChainResult run_chain_once(const ExperimentConfig& cfg, const ChainJob& job, const ArtifactCache* cache);

// Every (alpha, n_train, hidden_size, seed) in that nesting order.
std::vector<ChainJob> grid_jobs(const ExperimentConfig& cfg);

struct JobOutcome {
  ChainJob job;
  std::optional<ChainResult> result;
  std::string error;  // set when result is empty
};

struct GridResult {
  std::vector<JobOutcome> outcomes;  // same order as the job list
  double wall_seconds = 0.0;
  unsigned threads = 1;
};

// Runs jobs on `threads` workers. Outcomes do not depend on the thread count.
GridResult run_grid(const ExperimentConfig& cfg, std::span<const ChainJob> jobs, unsigned threads,
                    const ArtifactCache* cache);

// File name -> rows for every figure analogue. Figures that depend on the
// learned model get one file per hidden size (suffix _hs<N>).
std::map<std::string, std::vector<CurveRow>> compute_curves(const ExperimentConfig& cfg,
                                                            std::span<const JobOutcome> outcomes);

// Per-job, per-k raw metrics in long form; failed recoveries leave the cost
// empty and report the overlap.
std::string metrics_csv(std::span<const JobOutcome> outcomes);
std::string decoder_metrics_csv(std::span<const JobOutcome> outcomes);

// Where a cold run of `cfg` (every artifact computed, none loaded) records
// its wall time inside the cache.
std::filesystem::path cold_run_record(const std::filesystem::path& cache_root, const ExperimentConfig& cfg);

// Writes every curve CSV, the raw metric CSVs, manifest.json and
// timings.json into out_dir. Returns the written file names.
std::vector<std::string> write_run_outputs(const ExperimentConfig& cfg, const GridResult& grid,
                                           const std::filesystem::path& out_dir,
                                           const std::filesystem::path& cache_root);

}  // namespace modechain
