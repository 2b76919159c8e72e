#include "modechain/adam.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "modechain/error.hpp"

namespace modechain {

AdamState AdamState::fresh(const LstmDims& dims, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  s.m = LstmParams::zeros(dims);
  s.v = LstmParams::zeros(dims);
  return s;
}

void adam_update(LstmParams& params, const LstmParams& grads, AdamState& state) {
  if (!(params.dims == grads.dims) || !(params.dims == state.m.dims)) {
    throw ValidationError("adam_update: shape mismatch between params, grads and optimizer state");
  }
  grads.for_each_tensor([](std::string_view name, std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("non-finite gradient in " + std::string(name) + "[" + std::to_string(i) +
                           "] = " + std::to_string(g[i]));
      }
    }
  });

  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);

  std::vector<std::span<const double>> g_views;
  std::vector<std::span<double>> m_views, v_views;
  grads.for_each_tensor([&](std::string_view, std::span<const double> s) { g_views.push_back(s); });
  state.m.for_each_tensor([&](std::string_view, std::span<double> s) { m_views.push_back(s); });
  state.v.for_each_tensor([&](std::string_view, std::span<double> s) { v_views.push_back(s); });

  std::size_t k = 0;
  params.for_each_tensor([&](std::string_view, std::span<double> p) {
    auto g = g_views[k];
    auto m = m_views[k];
    auto v = v_views[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / corr1;
      const double v_hat = v[i] / corr2;
      p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
    ++k;
  });
}

}  // namespace modechain
