#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "modechain/decode.hpp"
#include "modechain/dists.hpp"
#include "modechain/seqspace.hpp"
#include "modechain/train.hpp"

namespace modechain {

// Everything an experiment grid needs. Serialized as JSON:
//
// {
//   "profile": "default",
//   "space": {"vocab_size": 5, "eos_id": 4, "max_len": 8},
//   "ground_truth": {"alphas": [0.0, 0.3, 1.0], "mu": 0.0, "sigma": 1.0,
//                    "embed_dim": 64, "hidden_size": 64},
//   "n_train": [2000, 10000, 50000],
//   "train": {"hidden_sizes": [32, 64], "embed_dim": 0, "lr": 0.001,
//             "batch_size": 256, "val_interval": 50, "patience": 5,
//             "max_steps": 4000},
//   "decode": {"beam_width": 100, "anc_unique": 100, "max_attempts_factor": 1000},
//   "k_grid": [1, 2, 5, 10, 20, 50, 100],
//   "k_fixed": 20,
//   "seeds": [0, 1, ...]
// }
//
// A file may omit any field; missing fields come from its "profile".
struct ExperimentConfig {
  std::string profile = "default";
  SpaceSpec space;

  std::vector<double> alphas;
  double mu = 0.0;
  double sigma = 1.0;
  std::uint32_t gt_embed_dim = 0;
  std::uint32_t gt_hidden_size = 0;

  std::vector<std::uint64_t> n_train;

  std::vector<std::uint32_t> hidden_sizes;
  TrainConfig train;  // hidden_size and seed are filled in per job

  std::uint64_t beam_width = 0;
  std::uint64_t anc_unique = 0;
  std::uint64_t max_attempts_factor = 1000;

  std::vector<std::uint64_t> k_grid;
  std::uint64_t k_fixed = 0;
  std::vector<std::uint64_t> seeds;

  // Throws ConfigError naming the offending field.
  void validate() const;

  LstmDims gt_dims() const;
  GroundTruthSpec gt_spec(double alpha, std::uint64_t seed) const;
  TrainConfig train_config(std::uint32_t hidden_size, std::uint64_t seed) const;
  DecodeConfig decode_config(DecodeKind kind, std::uint64_t seed) const;
};

std::vector<std::string> profile_names();
// Throws ConfigError for unknown names.
ExperimentConfig profile_config(std::string_view name);

std::string config_to_json(const ExperimentConfig& cfg, int indent = 2);
// Fields absent from the text fall back to the named profile. Unknown keys
// and wrongly typed values are ConfigErrors.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::string& path);

// Applies "dotted.key=value"; value is parsed as JSON, falling back to a
// plain string. Example: "train.lr=3e-4", "ground_truth.alphas=[0.3]".
void apply_override(ExperimentConfig& cfg, std::string_view assignment);

// FNV-1a of the canonical (compact, key-sorted) JSON.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string hex64(std::uint64_t value);

}  // namespace modechain
