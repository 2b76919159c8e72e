#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modechain/lstm.hpp"
#include "modechain/seqspace.hpp"

namespace modechain {

inline constexpr double kNormTolerance = 1e-9;

// Log-probabilities over every id of Omega; -inf marks zero mass.
struct LogProbTable {
  std::vector<double> values;
  bool normalized = false;

  std::size_t size() const noexcept { return values.size(); }
  double log_sum_exp() const;
  std::size_t support_size() const;
  bool in_support(SequenceId id) const { return values[id] != -std::numeric_limits<double>::infinity(); }

  // Shifts values so they log-sum-exp to zero.
  void normalize();
  // True when |log-sum-exp| <= tol.
  bool is_normalized(double tol = kNormTolerance) const;
};

struct GroundTruthSpec {
  double alpha = 1.0;
  std::uint64_t theta_seed = 0;
  std::uint64_t noise_seed = 0;
  double mu = 0.0;
  double sigma = 1.0;

  void validate() const;
};

// Multiset of sequence ids.
struct Dataset {
  std::map<SequenceId, std::uint64_t> counts;
  std::uint64_t total = 0;

  void add(SequenceId id, std::uint64_t count = 1);
  std::size_t distinct() const noexcept { return counts.size(); }
};

// Inverse-CDF Laplace draw from u in (0, 1).
double laplace_from_uniform(double u, double mu, double sigma);

// The fixed per-sequence sample x(s); a pure function of (noise_seed, id).
double laplace_noise(std::uint64_t noise_seed, SequenceId id, double mu, double sigma);

// Raw log p_theta(s) for every id, computed level by level over the prefix
// tree with one recurrence step per prefix node. Not renormalized: the mass
// of unterminated max-length prefixes is missing. At most `chunk_rows`
// states are live per tree level.
std::vector<double> exact_log_probs(const LstmParams& params, const SpaceSpec& space,
                                    std::size_t chunk_rows = 4096);

// p*_alpha(s) ∝ exp(alpha * log p_theta(s) + (1 - alpha) * x(s)), normalized
// over Omega. params_gt may be null when alpha == 0.
LogProbTable ground_truth_table(const GroundTruthSpec& spec, const SpaceSpec& space, const LstmParams* params_gt);

// p_model renormalized over Omega.
LogProbTable model_table(const LstmParams& params, const SpaceSpec& space);

// n categorical draws by binary search over the cumulative distribution.
Dataset sample_dataset(const LogProbTable& table, std::uint64_t n, std::uint64_t seed);

// Normalized counts of the union of both multisets.
LogProbTable empirical_table(const Dataset& train, const Dataset& valid, std::uint64_t omega_size);

// Model probabilities renormalized over the decoded set, -inf elsewhere.
LogProbTable decoding_induced_table(const LogProbTable& model, std::span<const SequenceId> decoded);

// Table file: "MRT1" | u64 |Omega| | f64 log-probs | u64 FNV-1a checksum.
std::vector<unsigned char> encode_table(const LogProbTable& table);
LogProbTable decode_table(std::span<const unsigned char> bytes);
void save_table(const std::filesystem::path& path, const LogProbTable& table);
LogProbTable load_table(const std::filesystem::path& path);

// "id,count" CSV with a header row, ids ascending.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(std::string_view text, std::uint64_t omega_size);

}  // namespace modechain
