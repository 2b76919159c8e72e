#include "modechain/curves.hpp"

#include <algorithm>
#include <cmath>

#include "modechain/csv.hpp"
#include "modechain/error.hpp"

namespace modechain {

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

CurvePoint aggregate(double x, std::span<const std::optional<double>> per_seed) {
  CurvePoint p;
  p.x = x;
  p.n_seeds = per_seed.size();
  std::vector<double> ok;
  for (const auto& v : per_seed) {
    if (v) {
      ok.push_back(*v);
    } else {
      ++p.n_failures;
    }
  }
  if (!ok.empty()) {
    p.median = nearest_rank_quantile(ok, 0.5);
    p.q25 = nearest_rank_quantile(ok, 0.25);
    p.q75 = nearest_rank_quantile(ok, 0.75);
  }
  return p;
}

std::string curve_csv(std::span<const CurveRow> rows) {
  std::string out = "alpha,n_train,decoder,x,median,q25,q75,n_failures,n_seeds\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : rows) {
    out += format_real(r.alpha) + ',' + std::to_string(r.n_train) + ',' + r.decoder + ',' + format_real(r.point.x) +
           ',' + opt(r.point.median) + ',' + opt(r.point.q25) + ',' + opt(r.point.q75) + ',' +
           std::to_string(r.point.n_failures) + ',' + std::to_string(r.point.n_seeds) + '\n';
  }
  return out;
}

}  // namespace modechain
