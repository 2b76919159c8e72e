#include "modechain/dists.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "modechain/binary_io.hpp"
#include "modechain/error.hpp"
#include "modechain/rng.hpp"

namespace modechain {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::string_view kTableMagic = "MRT1";

double log_sum_exp(std::span<const double> values) {
  double mx = kNegInf;
  for (double v : values) mx = std::max(mx, v);
  if (mx == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

void check_finite_or_neg_inf(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i]) || values[i] == std::numeric_limits<double>::infinity()) {
      throw NumericError(std::string(what) + ": non-finite value at id " + std::to_string(i));
    }
  }
}

void expand_level(const LstmParams& params, const SpaceSpec& space, std::uint32_t level, std::uint64_t first_index,
                  StateBatch& states, const std::vector<double>& prefix_lp, std::vector<double>& out,
                  std::size_t chunk_rows) {
  const Eigen::Index n = states.rows();
  const Matrix logits = output_logits(params, states);
  Matrix lp;
  masked_log_softmax_rows(logits, space.vocab.size, lp);

  const std::uint64_t offset = level_offset(space, level) + first_index;
  const Token eos = space.vocab.eos_id;
  for (Eigen::Index r = 0; r < n; ++r) out[offset + r] = prefix_lp[r] + lp(r, eos);
  if (level + 1 >= space.max_len) return;

  const std::uint32_t m = space.vocab.content_count();
  const Eigen::Index group = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(chunk_rows / m));
  std::vector<std::int64_t> parents;
  std::vector<Token> tokens;
  std::vector<double> child_lp;
  for (Eigen::Index g0 = 0; g0 < n; g0 += group) {
    const Eigen::Index g1 = std::min(n, g0 + group);
    parents.clear();
    tokens.clear();
    child_lp.clear();
    for (Eigen::Index r = g0; r < g1; ++r) {
      for (std::uint32_t i = 0; i < m; ++i) {
        const Token tok = space.vocab.content_token(i);
        parents.push_back(r);
        tokens.push_back(tok);
        child_lp.push_back(prefix_lp[r] + lp(r, tok));
      }
    }
    StateBatch children = states.gather(parents);
    advance(params, tokens, children);
    expand_level(params, space, level + 1, (first_index + static_cast<std::uint64_t>(g0)) * m, children, child_lp,
                 out, chunk_rows);
  }
}

}  // namespace

double LogProbTable::log_sum_exp() const { return modechain::log_sum_exp(values); }

std::size_t LogProbTable::support_size() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v != kNegInf; }));
}

void LogProbTable::normalize() {
  const double lse = log_sum_exp();
  if (!std::isfinite(lse)) throw NumericError("cannot normalize a table with no finite mass");
  for (double& v : values) v -= lse;
  normalized = true;
}

bool LogProbTable::is_normalized(double tol) const {
  const double lse = log_sum_exp();
  return std::isfinite(lse) && std::abs(lse) <= tol;
}

void GroundTruthSpec::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1] (got " + std::to_string(alpha) + ")");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0 (got " + std::to_string(sigma) + ")");
  if (!std::isfinite(mu)) throw ConfigError("mu must be finite");
}

void Dataset::add(SequenceId id, std::uint64_t count) {
  counts[id] += count;
  total += count;
}

double laplace_from_uniform(double u, double mu, double sigma) {
  const double d = u - 0.5;
  const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  return mu - sigma * sign * std::log(1.0 - 2.0 * std::abs(d));
}

double laplace_noise(std::uint64_t noise_seed, SequenceId id, double mu, double sigma) {
  return laplace_from_uniform(bits_to_open_unit(keyed_bits(noise_seed, id)), mu, sigma);
}

std::vector<double> exact_log_probs(const LstmParams& params, const SpaceSpec& space, std::size_t chunk_rows) {
  space.validate();
  if (params.dims.vocab_size != space.vocab.size) throw ValidationError("model vocabulary does not match space");
  std::vector<double> out(space_size(space), kNegInf);
  StateBatch root = initial_states(params, space.vocab.eos_id, 1);
  const std::vector<double> root_lp = {0.0};
  expand_level(params, space, 0, 0, root, root_lp, out, std::max<std::size_t>(chunk_rows, 1));
  check_finite_or_neg_inf(out, "exact_log_probs");
  return out;
}

LogProbTable ground_truth_table(const GroundTruthSpec& spec, const SpaceSpec& space, const LstmParams* params_gt) {
  spec.validate();
  space.validate();
  const std::uint64_t n = space_size(space);
  LogProbTable table;
  table.values.assign(n, 0.0);
  if (spec.alpha > 0.0) {
    if (!params_gt) throw ConfigError("ground truth with alpha > 0 needs LSTM parameters");
    const std::vector<double> lp = exact_log_probs(*params_gt, space);
    for (std::uint64_t id = 0; id < n; ++id) table.values[id] = spec.alpha * lp[id];
  }
  if (spec.alpha < 1.0) {
    const double w = 1.0 - spec.alpha;
    for (std::uint64_t id = 0; id < n; ++id) {
      table.values[id] += w * laplace_noise(spec.noise_seed, id, spec.mu, spec.sigma);
    }
  }
  check_finite_or_neg_inf(table.values, "ground_truth_table");
  table.normalize();
  return table;
}

LogProbTable model_table(const LstmParams& params, const SpaceSpec& space) {
  LogProbTable table;
  table.values = exact_log_probs(params, space);
  table.normalize();
  return table;
}

Dataset sample_dataset(const LogProbTable& table, std::uint64_t n, std::uint64_t seed) {
  if (table.values.empty() || !table.is_normalized()) throw ValidationError("sample_dataset: table is not normalized");
  std::vector<double> cdf(table.size());
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    const double p = std::exp(table.values[i]);
    if (p > 0.0) last_positive = i;
    acc += p;
    cdf[i] = acc;
  }
  Rng rng(seed);
  Dataset out;
  for (std::uint64_t k = 0; k < n; ++k) {
    const double u = rng.uniform() * acc;
    auto idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (idx >= cdf.size()) idx = last_positive;
    out.add(idx);
  }
  return out;
}

LogProbTable empirical_table(const Dataset& train, const Dataset& valid, std::uint64_t omega_size) {
  const std::uint64_t total = train.total + valid.total;
  if (total == 0) throw ValidationError("empirical_table: both datasets are empty");
  LogProbTable table;
  table.values.assign(omega_size, kNegInf);
  std::map<SequenceId, std::uint64_t> merged = train.counts;
  for (const auto& [id, c] : valid.counts) merged[id] += c;
  const double log_total = std::log(static_cast<double>(total));
  for (const auto& [id, c] : merged) {
    if (id >= omega_size) throw ValidationError("dataset id " + std::to_string(id) + " outside Omega");
    if (c > 0) table.values[id] = std::log(static_cast<double>(c)) - log_total;
  }
  table.normalized = true;
  return table;
}

LogProbTable decoding_induced_table(const LogProbTable& model, std::span<const SequenceId> decoded) {
  if (decoded.empty()) throw ValidationError("decoding_induced_table: decoded set is empty");
  std::vector<SequenceId> ids(decoded.begin(), decoded.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<double> selected;
  for (SequenceId id : ids) {
    if (id >= model.size()) throw ValidationError("decoded id " + std::to_string(id) + " outside Omega");
    selected.push_back(model.values[id]);
  }
  const double z = log_sum_exp(selected);
  if (z == kNegInf) throw NumericError("decoded set has zero model mass");
  LogProbTable table;
  table.values.assign(model.size(), kNegInf);
  for (std::size_t i = 0; i < ids.size(); ++i) table.values[ids[i]] = selected[i] - z;
  table.normalized = true;
  return table;
}

std::vector<unsigned char> encode_table(const LogProbTable& table) {
  ByteWriter w;
  w.put_bytes(kTableMagic);
  w.put_u64(table.values.size());
  w.put_f64s(table.values);
  return std::move(w).seal();
}

LogProbTable decode_table(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != kTableMagic) {
    throw ValidationError("bad magic (expected MRT1)");
  }
  ByteReader r(checked_payload(bytes));
  r.get_bytes(4);
  const std::uint64_t n = r.get_u64();
  if (r.remaining() != 8 * n) throw ValidationError("table length does not match its header");
  LogProbTable table;
  table.values.resize(n);
  r.get_f64s(table.values);
  table.normalized = table.is_normalized();
  return table;
}

void save_table(const std::filesystem::path& path, const LogProbTable& table) { write_file(path, encode_table(table)); }

LogProbTable load_table(const std::filesystem::path& path) { return decode_table(read_file(path)); }

std::string dataset_to_csv(const Dataset& data) {
  std::string out = "id,count\n";
  for (const auto& [id, c] : data.counts) out += std::to_string(id) + "," + std::to_string(c) + "\n";
  return out;
}

Dataset dataset_from_csv(std::string_view text, std::uint64_t omega_size) {
  Dataset out;
  std::size_t pos = 0;
  bool header = true;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line == "id,count") continue;
    }
    const auto comma = line.find(',');
    SequenceId id = 0;
    std::uint64_t count = 0;
    if (comma == std::string_view::npos ||
        std::from_chars(line.data(), line.data() + comma, id).ec != std::errc{} ||
        std::from_chars(line.data() + comma + 1, line.data() + line.size(), count).ec != std::errc{}) {
      throw ValidationError("dataset csv: malformed line " + std::to_string(line_no));
    }
    if (id >= omega_size) throw ValidationError("dataset csv: id " + std::to_string(id) + " outside Omega");
    out.add(id, count);
  }
  return out;
}

}  // namespace modechain
