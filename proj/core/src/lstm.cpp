#include "modechain/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "modechain/error.hpp"
#include "modechain/rng.hpp"

namespace modechain {

void LstmDims::validate() const {
  if (vocab_size < 2) throw ConfigError("model vocab_size must be >= 2");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (hidden_size < 1) throw ConfigError("hidden_size must be >= 1");
}

LstmParams LstmParams::zeros(const LstmDims& dims) {
  dims.validate();
  const Eigen::Index out = dims.output_size();
  const Eigen::Index hidden = dims.hidden_size;
  LstmParams p;
  p.dims = dims;
  p.embed = Matrix::Zero(out, dims.embed_dim);
  for (int l = 0; l < kNumLayers; ++l) {
    p.layers[l].w_ih = Matrix::Zero(4 * hidden, dims.layer_input(l));
    p.layers[l].w_hh = Matrix::Zero(4 * hidden, hidden);
    p.layers[l].b = Vector::Zero(4 * hidden);
  }
  p.out_proj = Matrix::Zero(out, hidden);
  p.out_bias = Vector::Zero(out);
  return p;
}

std::size_t LstmParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](std::string_view, std::span<const double> t) { n += t.size(); });
  return n;
}

bool LstmParams::all_finite() const {
  bool ok = true;
  for_each_tensor([&](std::string_view, std::span<const double> t) {
    for (double x : t) ok = ok && std::isfinite(x);
  });
  return ok;
}

double& LstmParams::flat(std::size_t index) {
  double* found = nullptr;
  for_each_tensor([&](std::string_view, std::span<double> t) {
    if (found) return;
    if (index < t.size()) {
      found = &t[index];
    } else {
      index -= t.size();
    }
  });
  if (!found) throw ValidationError("flat parameter index out of range");
  return *found;
}

double LstmParams::flat(std::size_t index) const { return const_cast<LstmParams*>(this)->flat(index); }

bool operator==(const LstmParams& a, const LstmParams& b) {
  if (!(a.dims == b.dims)) return false;
  std::vector<double> fa, fb;
  a.for_each_tensor([&](std::string_view, std::span<const double> t) { fa.insert(fa.end(), t.begin(), t.end()); });
  b.for_each_tensor([&](std::string_view, std::span<const double> t) { fb.insert(fb.end(), t.begin(), t.end()); });
  return fa == fb;
}

LstmParams init_params(const LstmDims& dims, std::uint64_t seed) {
  LstmParams p = LstmParams::zeros(dims);
  Rng rng(seed);
  auto fill = [&](std::span<double> t, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (double& x : t) x = (2.0 * rng.uniform() - 1.0) * bound;
  };
  fill(std::span(p.embed.data(), p.embed.size()), 1.0);
  const Eigen::Index hidden = dims.hidden_size;
  for (int l = 0; l < kNumLayers; ++l) {
    auto& layer = p.layers[l];
    fill(std::span(layer.w_ih.data(), layer.w_ih.size()), dims.layer_input(l));
    fill(std::span(layer.w_hh.data(), layer.w_hh.size()), dims.hidden_size);
    layer.b.setZero();
    layer.b.segment(hidden, hidden).setOnes();
  }
  fill(std::span(p.out_proj.data(), p.out_proj.size()), dims.hidden_size);
  p.out_bias.setZero();
  return p;
}

LstmState LstmState::zeros(const LstmDims& dims) {
  LstmState s;
  for (int l = 0; l < kNumLayers; ++l) {
    s.h[l] = Vector::Zero(dims.hidden_size);
    s.c[l] = Vector::Zero(dims.hidden_size);
  }
  return s;
}

StateBatch StateBatch::zeros(const LstmDims& dims, Eigen::Index rows) {
  StateBatch s;
  for (int l = 0; l < kNumLayers; ++l) {
    s.h[l] = Matrix::Zero(rows, dims.hidden_size);
    s.c[l] = Matrix::Zero(rows, dims.hidden_size);
  }
  return s;
}

StateBatch StateBatch::gather(std::span<const std::int64_t> parents) const {
  StateBatch out;
  const auto n = static_cast<Eigen::Index>(parents.size());
  for (int l = 0; l < kNumLayers; ++l) {
    out.h[l].resize(n, h[l].cols());
    out.c[l].resize(n, c[l].cols());
    for (Eigen::Index r = 0; r < n; ++r) {
      out.h[l].row(r) = h[l].row(parents[r]);
      out.c[l].row(r) = c[l].row(parents[r]);
    }
  }
  return out;
}

namespace {

// Activated gates [i | f | g | o] plus the new cell and hidden rows.
struct CellOut {
  Matrix gates;
  Matrix c;
  Matrix tanh_c;
  Matrix h;
};

// tanh through the vectorized exp (Eigen has no packet tanh for double).
// Absolute error stays near 1e-16; saturates cleanly for large |x|.
template <class A>
auto tanh_via_exp(const A& x) {
  return 2.0 / (1.0 + (-2.0 * x).exp()) - 1.0;
}

void cell_forward(const LstmLayerParams& layer, const Matrix& x, const Matrix* h_prev, const Matrix* c_prev,
                  Eigen::Index hidden, CellOut& out) {
  const Eigen::Index n = x.rows();
  out.gates.resize(n, 4 * hidden);
  out.gates.noalias() = x * layer.w_ih.transpose();
  if (h_prev) out.gates.noalias() += *h_prev * layer.w_hh.transpose();
  out.gates.rowwise() += layer.b.transpose();

  auto z = out.gates.array();
  z.leftCols(2 * hidden) = (1.0 + (-z.leftCols(2 * hidden)).exp()).inverse();
  z.middleCols(2 * hidden, hidden) = tanh_via_exp(z.middleCols(2 * hidden, hidden));
  z.rightCols(hidden) = (1.0 + (-z.rightCols(hidden)).exp()).inverse();

  const auto i = out.gates.leftCols(hidden).array();
  const auto f = out.gates.middleCols(hidden, hidden).array();
  const auto g = out.gates.middleCols(2 * hidden, hidden).array();
  const auto o = out.gates.rightCols(hidden).array();
  if (c_prev) {
    out.c = (f * c_prev->array() + i * g).matrix();
  } else {
    out.c = (i * g).matrix();
  }
  out.tanh_c = tanh_via_exp(out.c.array()).matrix();
  out.h = (o * out.tanh_c.array()).matrix();
}

Matrix embed_rows(const LstmParams& params, std::span<const Token> tokens) {
  Matrix x(static_cast<Eigen::Index>(tokens.size()), params.dims.embed_dim);
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    if (tokens[r] >= params.dims.output_size()) throw ValidationError("token outside model vocabulary");
    x.row(static_cast<Eigen::Index>(r)) = params.embed.row(tokens[r]);
  }
  return x;
}

}  // namespace

void advance(const LstmParams& params, std::span<const Token> tokens, StateBatch& states) {
  if (static_cast<Eigen::Index>(tokens.size()) != states.rows()) {
    throw ValidationError("advance: token count does not match state rows");
  }
  Matrix x = embed_rows(params, tokens);
  CellOut out;
  for (int l = 0; l < kNumLayers; ++l) {
    cell_forward(params.layers[l], x, &states.h[l], &states.c[l], params.dims.hidden_size, out);
    states.c[l] = std::move(out.c);
    states.h[l] = out.h;
    x = std::move(out.h);
  }
}

Matrix output_logits(const LstmParams& params, const StateBatch& states) {
  Matrix logits(states.rows(), params.dims.output_size());
  logits.noalias() = states.h[kNumLayers - 1] * params.out_proj.transpose();
  logits.rowwise() += params.out_bias.transpose();
  return logits;
}

StateBatch initial_states(const LstmParams& params, Token bos, Eigen::Index rows) {
  StateBatch s = StateBatch::zeros(params.dims, rows);
  std::vector<Token> tokens(static_cast<std::size_t>(rows), bos);
  advance(params, tokens, s);
  return s;
}

Vector masked_log_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits, std::uint32_t vocab_size) {
  const auto real = logits.head(vocab_size);
  const double mx = real.maxCoeff();
  const double lse = mx + std::log((real.array() - mx).exp().sum());
  return (real.array() - lse).matrix().transpose();
}

void masked_log_softmax_rows(const Matrix& logits, std::uint32_t vocab_size, Matrix& out) {
  const Eigen::Index v = vocab_size;
  out.resize(logits.rows(), v);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto real = logits.row(r).head(v);
    const double mx = real.maxCoeff();
    const double lse = mx + std::log((real.array() - mx).exp().sum());
    out.row(r) = real.array() - lse;
  }
}

StepOutput step(const LstmParams& params, Token token, const LstmState& state) {
  StateBatch s;
  for (int l = 0; l < kNumLayers; ++l) {
    s.h[l] = state.h[l].transpose();
    s.c[l] = state.c[l].transpose();
  }
  const Token tokens[1] = {token};
  advance(params, tokens, s);
  StepOutput out;
  out.logits = output_logits(params, s).row(0).transpose();
  for (int l = 0; l < kNumLayers; ++l) {
    out.state.h[l] = s.h[l].row(0).transpose();
    out.state.c[l] = s.c[l].row(0).transpose();
  }
  return out;
}

double sequence_log_prob(const LstmParams& params, const SpaceSpec& space, std::span<const Token> seq) {
  validate_sequence(space, seq);
  if (params.dims.vocab_size != space.vocab.size) throw ValidationError("model vocabulary does not match space");
  LstmState state = LstmState::zeros(params.dims);
  Token input = space.vocab.eos_id;
  double total = 0.0;
  for (Token target : seq) {
    StepOutput out = step(params, input, state);
    total += masked_log_softmax(out.logits.transpose(), space.vocab.size)(target);
    state = std::move(out.state);
    input = target;
  }
  return total;
}

std::size_t Batch::real_count() const {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
}

namespace {

// The batch folded into a prefix trie: level t holds every distinct prefix of
// length t that still has a target at position t. Each node runs one
// recurrence step; targets of rows sharing the node are pooled as weighted
// counts, so loss and gradient match the row-by-row computation exactly.
struct TrieLevel {
  std::vector<Token> inputs;         // token consumed at this node (bos at level 0)
  std::vector<std::int64_t> parent;  // node index at level t-1
  Matrix counts;                     // nodes x (V+1) target weights
  Eigen::VectorXd node_weight;       // row sums of counts
};

struct PreparedBatch {
  std::vector<TrieLevel> levels;
  double total_weight = 0.0;  // weighted count of real target tokens
};

PreparedBatch prepare(const Batch& batch, const LstmDims& dims, Token bos) {
  if (batch.targets.size() != batch.rows * batch.cols || batch.mask.size() != batch.rows * batch.cols) {
    throw ValidationError("batch shape mismatch");
  }
  // Lexicographic order keeps rows that share a prefix contiguous.
  std::map<std::vector<Token>, double> unique;
  for (std::size_t r = 0; r < batch.rows; ++r) {
    std::vector<Token> row;
    bool ended = false;
    for (std::size_t t = 0; t < batch.cols; ++t) {
      const Token tok = batch.target(r, t);
      if (tok > dims.vocab_size) throw ValidationError("batch token outside model vocabulary");
      if (batch.real(r, t)) {
        if (ended) throw ValidationError("batch mask must be a prefix of each row");
        if (tok == dims.vocab_size) throw ValidationError("pad token at a real (masked-in) position");
        row.push_back(tok);
      } else {
        ended = true;
      }
    }
    if (!row.empty()) unique[std::move(row)] += 1.0;
  }
  if (unique.empty()) throw ValidationError("batch mask is empty");

  std::vector<const std::vector<Token>*> rows;
  std::vector<double> weight;
  std::size_t steps = 0;
  PreparedBatch out;
  for (const auto& [row, w] : unique) {
    rows.push_back(&row);
    weight.push_back(w);
    steps = std::max(steps, row.size());
    out.total_weight += w * static_cast<double>(row.size());
  }

  const Eigen::Index outputs = dims.output_size();
  std::vector<std::int64_t> node_of_row(rows.size(), -1);
  std::vector<std::int64_t> next_node_of_row(rows.size(), -1);
  out.levels.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    TrieLevel& level = out.levels[t];
    std::vector<std::size_t> members;
    const std::vector<Token>* last = nullptr;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = *rows[r];
      if (row.size() <= t) {
        next_node_of_row[r] = -1;
        continue;
      }
      const bool same_prefix = last && std::equal(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(t),
                                                  last->begin());
      if (!same_prefix) {
        level.inputs.push_back(t == 0 ? bos : row[t - 1]);
        level.parent.push_back(t == 0 ? -1 : node_of_row[r]);
      }
      last = &row;
      next_node_of_row[r] = static_cast<std::int64_t>(level.inputs.size()) - 1;
      members.push_back(r);
    }
    level.counts = Matrix::Zero(static_cast<Eigen::Index>(level.inputs.size()), outputs);
    for (std::size_t r : members) level.counts(next_node_of_row[r], (*rows[r])[t]) += weight[r];
    level.node_weight = level.counts.rowwise().sum();
    std::swap(node_of_row, next_node_of_row);
  }
  return out;
}

struct StepCache {
  std::array<CellOut, kNumLayers> cells;
  Matrix probs;
};

Matrix gather_rows(const Matrix& m, std::span<const std::int64_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

void scatter_add_rows(Matrix& dst, const Matrix& src, std::span<const std::int64_t> idx) {
  for (std::size_t i = 0; i < idx.size(); ++i) dst.row(idx[i]) += src.row(static_cast<Eigen::Index>(i));
}

// Runs the forward pass over the trie; returns the weighted mean NLL.
double forward(const LstmParams& params, const PreparedBatch& pb, std::vector<StepCache>& caches) {
  const Eigen::Index hidden = params.dims.hidden_size;
  const std::size_t steps = pb.levels.size();
  caches.assign(steps, {});
  double nll = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const TrieLevel& level = pb.levels[t];
    StepCache& cur = caches[t];
    Matrix x = embed_rows(params, level.inputs);
    for (int l = 0; l < kNumLayers; ++l) {
      if (t > 0) {
        const Matrix h_prev = gather_rows(caches[t - 1].cells[l].h, level.parent);
        const Matrix c_prev = gather_rows(caches[t - 1].cells[l].c, level.parent);
        cell_forward(params.layers[l], x, &h_prev, &c_prev, hidden, cur.cells[l]);
      } else {
        cell_forward(params.layers[l], x, nullptr, nullptr, hidden, cur.cells[l]);
      }
      x = cur.cells[l].h;
    }
    Matrix& probs = cur.probs;
    probs.resize(x.rows(), params.dims.output_size());
    probs.noalias() = x * params.out_proj.transpose();
    probs.rowwise() += params.out_bias.transpose();
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      auto row = probs.row(r);
      const double mx = row.maxCoeff();
      row.array() = (row.array() - mx).exp();
      const double sum = row.sum();
      row /= sum;
      for (Eigen::Index k = 0; k < row.size(); ++k) {
        const double c = level.counts(r, k);
        if (c != 0.0) nll -= c * std::log(row(k));
      }
    }
  }
  const double loss = nll / pb.total_weight;
  if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
  return loss;
}

}  // namespace

double batch_loss(const LstmParams& params, const Batch& batch, Token bos) {
  const PreparedBatch pb = prepare(batch, params.dims, bos);
  std::vector<StepCache> caches;
  return forward(params, pb, caches);
}

LossAndGrads loss_and_grads(const LstmParams& params, const Batch& batch, Token bos) {
  const PreparedBatch pb = prepare(batch, params.dims, bos);
  std::vector<StepCache> caches;
  LossAndGrads out;
  out.loss = forward(params, pb, caches);
  out.grads = LstmParams::zeros(params.dims);
  LstmParams& g = out.grads;

  const Eigen::Index hidden = params.dims.hidden_size;
  const std::size_t steps = caches.size();
  // Gradients flowing into level t from its children, per layer.
  std::array<Matrix, kNumLayers> dh_in;
  std::array<Matrix, kNumLayers> dc_in;
  Matrix dz;
  for (std::size_t t = steps; t-- > 0;) {
    const TrieLevel& level = pb.levels[t];
    StepCache& cur = caches[t];
    const Eigen::Index n = static_cast<Eigen::Index>(level.inputs.size());

    Matrix& dlogits = cur.probs;
    dlogits.array().colwise() *= level.node_weight.array();
    dlogits -= level.counts;
    dlogits /= pb.total_weight;

    const Matrix& h_top = cur.cells[kNumLayers - 1].h;
    g.out_proj.noalias() += dlogits.transpose() * h_top;
    g.out_bias += dlogits.colwise().sum().transpose();
    Matrix dh = dlogits * params.out_proj;

    std::array<Matrix, kNumLayers> dh_parent;
    std::array<Matrix, kNumLayers> dc_parent;
    for (int l = kNumLayers - 1; l >= 0; --l) {
      const CellOut& cell = cur.cells[l];
      const LstmLayerParams& layer = params.layers[l];
      if (dh_in[l].rows() == n) dh += dh_in[l];

      Matrix dc = (dh.array() * cell.gates.rightCols(hidden).array() * (1.0 - cell.tanh_c.array().square())).matrix();
      if (dc_in[l].rows() == n) dc += dc_in[l];

      const auto i = cell.gates.leftCols(hidden).array();
      const auto f = cell.gates.middleCols(hidden, hidden).array();
      const auto gg = cell.gates.middleCols(2 * hidden, hidden).array();
      const auto o = cell.gates.rightCols(hidden).array();
      dz.resize(n, 4 * hidden);
      dz.leftCols(hidden) = (dc.array() * gg * i * (1.0 - i)).matrix();
      Matrix c_prev;
      if (t > 0) {
        c_prev = gather_rows(caches[t - 1].cells[l].c, level.parent);
        dz.middleCols(hidden, hidden) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
      } else {
        dz.middleCols(hidden, hidden).setZero();
      }
      dz.middleCols(2 * hidden, hidden) = (dc.array() * i * (1.0 - gg.square())).matrix();
      dz.rightCols(hidden) = (dh.array() * cell.tanh_c.array() * o * (1.0 - o)).matrix();

      if (l == 0) {
        const Matrix x = embed_rows(params, level.inputs);
        g.layers[0].w_ih.noalias() += dz.transpose() * x;
      } else {
        g.layers[l].w_ih.noalias() += dz.transpose() * cur.cells[l - 1].h;
      }
      g.layers[l].b += dz.colwise().sum().transpose();

      if (t > 0) {
        const Matrix h_prev = gather_rows(caches[t - 1].cells[l].h, level.parent);
        g.layers[l].w_hh.noalias() += dz.transpose() * h_prev;
        const Eigen::Index parents = static_cast<Eigen::Index>(pb.levels[t - 1].inputs.size());
        dh_parent[l] = Matrix::Zero(parents, hidden);
        dc_parent[l] = Matrix::Zero(parents, hidden);
        scatter_add_rows(dh_parent[l], dz * layer.w_hh, level.parent);
        scatter_add_rows(dc_parent[l], (dc.array() * f).matrix(), level.parent);
      }

      Matrix dx = dz * layer.w_ih;
      if (l == 0) {
        for (Eigen::Index r = 0; r < n; ++r) g.embed.row(level.inputs[r]) += dx.row(r);
      } else {
        dh = std::move(dx);
      }
    }
    dh_in = std::move(dh_parent);
    dc_in = std::move(dc_parent);
  }
  return out;
}

}  // namespace modechain
