#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace modechain {

// Nearest-rank (inclusive) quantile of a non-empty sample: the value at
// 1-based rank ceil(q * n), clamped to [1, n].
double nearest_rank_quantile(std::vector<double> values, double q);

struct CurvePoint {
  double x = 0.0;
  std::optional<double> median;  // absent when every seed failed
  std::optional<double> q25;
  std::optional<double> q75;
  std::uint64_t n_failures = 0;
  std::uint64_t n_seeds = 0;
};

// One value per seed; nullopt marks a failed seed, which is counted but kept
// out of the quantiles.
CurvePoint aggregate(double x, std::span<const std::optional<double>> per_seed);

struct CurveRow {
  double alpha = 0.0;
  std::uint64_t n_train = 0;
  std::string decoder = "none";
  CurvePoint point;
};

// "alpha,n_train,decoder,x,median,q25,q75,n_failures,n_seeds"; missing
// quantiles are written as empty fields.
std::string curve_csv(std::span<const CurveRow> rows);

}  // namespace modechain
