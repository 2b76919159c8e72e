#pragma once

#include <cstdint>

#include "modechain/lstm.hpp"

namespace modechain {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  LstmParams m;  // first moment
  LstmParams v;  // second moment
  std::uint64_t step = 0;

  static AdamState fresh(const LstmDims& dims, const AdamConfig& config);
};

// One bias-corrected Adam step. Throws NumericError naming the first
// non-finite gradient entry; params and state are untouched in that case.
void adam_update(LstmParams& params, const LstmParams& grads, AdamState& state);

}  // namespace modechain
