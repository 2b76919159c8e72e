#include "modechain/chain.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "modechain/binary_io.hpp"
#include "modechain/checkpoint.hpp"
#include "modechain/csv.hpp"
#include "modechain/error.hpp"
#include "modechain/log.hpp"
#include "modechain/rng.hpp"

namespace modechain {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path default_cache_dir() {
  if (const char* env = std::getenv("MODECHAIN_CACHE_DIR"); env && *env) return fs::path(env);
  return fs::path(".modechain-cache");
}

fs::path ArtifactCache::truth_path(std::uint64_t key) const { return root_ / "truth" / (hex64(key) + ".mrt"); }

fs::path ArtifactCache::model_path(std::uint64_t key) const { return root_ / "model" / (hex64(key) + ".mrc"); }

std::uint64_t validation_size(std::uint64_t n_train) { return (n_train + 19) / 20; }

fs::path cold_run_record(const fs::path& cache_root, const ExperimentConfig& cfg) {
  return cache_root / "runs" / (hex64(config_hash(cfg)) + ".json");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path sidecar(const fs::path& artifact) {
  fs::path p = artifact;
  p.replace_extension(".json");
  return p;
}

std::optional<json> read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  write_text_file(path, j.dump(2) + "\n");
}

template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// Bump when a change to the code alters cached tables or checkpoints.
constexpr int kArtifactFormat = 1;

std::uint64_t truth_key(const ExperimentConfig& cfg, double alpha, std::uint64_t seed) {
  const LstmDims d = cfg.gt_dims();
  const json j = {{"kind", "truth"},
                  {"format", kArtifactFormat},
                  {"vocab_size", cfg.space.vocab.size},
                  {"eos_id", cfg.space.vocab.eos_id},
                  {"max_len", cfg.space.max_len},
                  {"alpha", alpha},
                  {"mu", cfg.mu},
                  {"sigma", cfg.sigma},
                  {"embed_dim", d.embed_dim},
                  {"hidden_size", d.hidden_size},
                  {"seed", seed}};
  return fnv1a64(j.dump());
}

std::uint64_t model_key(std::uint64_t truth, std::uint64_t n_train, const TrainConfig& t, std::uint64_t seed) {
  const json j = {{"kind", "model"},
                  {"format", kArtifactFormat},
                  {"truth", hex64(truth)},
                  {"n_train", n_train},
                  {"n_valid", validation_size(n_train)},
                  {"hidden_size", t.hidden_size},
                  {"embed_dim", t.embed_dim},
                  {"lr", t.lr},
                  {"batch_size", t.batch_size},
                  {"val_interval", t.val_interval},
                  {"patience", t.patience},
                  {"max_steps", t.max_steps},
                  {"seed", seed}};
  return fnv1a64(j.dump());
}

std::optional<LogProbTable> load_cached_truth(const fs::path& path, ArtifactInfo& info) {
  if (!fs::exists(path)) return std::nullopt;
  const auto meta = read_json(sidecar(path));
  if (!meta || !meta->contains("created")) return std::nullopt;
  try {
    LogProbTable t = load_table(path);
    info = {path.string(), (*meta)["created"].get<std::string>(), true};
    return t;
  } catch (const Error& e) {
    log_warn("ignoring unreadable cached table " + path.string() + ": " + e.what());
    return std::nullopt;
  }
}

struct TrainedModel {
  LstmParams params;
  std::vector<HistoryEntry> history;
  std::uint64_t best_step = 0;
  double best_val_loss = 0.0;
  StopReason stopped_reason = StopReason::max_steps;
  std::uint64_t steps_run = 0;
};

json model_meta(const TrainedModel& m, const std::string& created) {
  json hist = json::array();
  for (const auto& h : m.history) hist.push_back({h.step, h.train_loss, h.val_loss});
  return {{"created", created},
          {"best_step", m.best_step},
          {"best_val_loss", m.best_val_loss},
          {"stopped_reason", std::string(to_string(m.stopped_reason))},
          {"steps_run", m.steps_run},
          {"history", hist}};
}

std::optional<TrainedModel> load_cached_model(const fs::path& path, const LstmDims& dims, ArtifactInfo& info) {
  if (!fs::exists(path)) return std::nullopt;
  const auto meta = read_json(sidecar(path));
  if (!meta) return std::nullopt;
  try {
    TrainedModel m;
    Checkpoint ckpt = load_checkpoint(path);
    if (!(ckpt.params.dims == dims)) return std::nullopt;
    m.params = std::move(ckpt.params);
    m.best_step = meta->at("best_step").get<std::uint64_t>();
    m.best_val_loss = meta->at("best_val_loss").get<double>();
    m.stopped_reason =
        meta->at("stopped_reason").get<std::string>() == "early_stop" ? StopReason::early_stop : StopReason::max_steps;
    m.steps_run = meta->at("steps_run").get<std::uint64_t>();
    for (const auto& h : meta->at("history")) {
      m.history.push_back({h.at(0).get<std::uint64_t>(), h.at(1).get<double>(), h.at(2).get<double>()});
    }
    info = {path.string(), meta->at("created").get<std::string>(), true};
    return m;
  } catch (const std::exception& e) {
    log_warn("ignoring unreadable cached checkpoint " + path.string() + ": " + e.what());
    return std::nullopt;
  }
}

std::vector<std::uint64_t> metric_ks(const ExperimentConfig& cfg) {
  std::set<std::uint64_t> ks(cfg.k_grid.begin(), cfg.k_grid.end());
  ks.insert(cfg.k_fixed);
  return {ks.begin(), ks.end()};
}

std::uint64_t overlap_of(const RecoveryOutcome& o, std::uint64_t modes) {
  if (const auto* f = std::get_if<RecoveryFailure>(&o)) return f->overlap;
  return modes;
}

std::optional<double> cost_of(const RecoveryOutcome& o) {
  if (const auto* c = std::get_if<RecoveryCost>(&o)) return static_cast<double>(c->cost);
  return std::nullopt;
}

std::string job_label(const ChainJob& j) {
  char alpha[32];
  std::snprintf(alpha, sizeof alpha, "%g", j.alpha);
  return std::string("alpha=") + alpha + " n_train=" + std::to_string(j.n_train) +
         " hidden=" + std::to_string(j.hidden_size) + " seed=" + std::to_string(j.seed);
}

}  // namespace

DataStage run_data_stage(const ExperimentConfig& cfg, double alpha, std::uint64_t n_train, std::uint64_t seed,
                         const ArtifactCache* cache) {
  DataStage d;
  d.alpha = alpha;
  d.n_train = n_train;
  d.seed = seed;
  d.truth_key = truth_key(cfg, alpha, seed);

  stage("ground_truth", [&] {
    const GroundTruthSpec spec = cfg.gt_spec(alpha, seed);
    spec.validate();
    std::optional<LogProbTable> loaded;
    if (cache) loaded = load_cached_truth(cache->truth_path(d.truth_key), d.truth_artifact);
    if (loaded) {
      if (loaded->size() != space_size(cfg.space)) throw ValidationError("cached table has the wrong size");
      d.truth = std::move(*loaded);
      return;
    }
    if (alpha > 0.0) {
      const LstmParams gt = init_params(cfg.gt_dims(), spec.theta_seed);
      d.truth = ground_truth_table(spec, cfg.space, &gt);
    } else {
      d.truth = ground_truth_table(spec, cfg.space, nullptr);
    }
    if (cache) {
      const fs::path path = cache->truth_path(d.truth_key);
      fs::create_directories(path.parent_path());
      save_table(path, d.truth);
      const std::string created = utc_now();
      write_json(sidecar(path), {{"created", created}, {"alpha", alpha}, {"seed", seed}});
      d.truth_artifact = {path.string(), created, false};
    }
  });

  stage("sample", [&] {
    d.train = sample_dataset(d.truth, n_train, derive_seed(seed, "sample_train"));
    d.valid = sample_dataset(d.truth, validation_size(n_train), derive_seed(seed, "sample_valid"));
    d.empirical = empirical_table(d.train, d.valid, d.truth.size());
  });
  return d;
}

ChainResult run_chain_once(const ExperimentConfig& cfg, const ChainJob& job, const ArtifactCache* cache) {
  const auto t0 = Clock::now();
  ChainResult r;
  r.job = job;
  r.omega = space_size(cfg.space);

  DataStage d = run_data_stage(cfg, job.alpha, job.n_train, job.seed, cache);
  r.truth_artifact = d.truth_artifact;
  r.train_distinct = d.train.distinct();
  r.emp_support = d.empirical.support_size();

  const TrainConfig tc = cfg.train_config(job.hidden_size, job.seed);
  TrainedModel model = stage("train", [&] {
    const std::uint64_t key = model_key(d.truth_key, job.n_train, tc, job.seed);
    if (cache) {
      if (auto m = load_cached_model(cache->model_path(key), tc.dims(cfg.space.vocab), r.model_artifact)) {
        return std::move(*m);
      }
    }
    TrainResult tr = train_model(d.train, d.valid, tc, cfg.space);
    TrainedModel m{std::move(tr.best_params), std::move(tr.history), tr.best_step, tr.best_val_loss,
                   tr.stopped_reason, tr.steps_run};
    if (cache) {
      const fs::path path = cache->model_path(key);
      fs::create_directories(path.parent_path());
      save_checkpoint(path, Checkpoint{m.params, tc.seed, m.best_step});
      const std::string created = utc_now();
      write_json(sidecar(path), model_meta(m, created));
      r.model_artifact = {path.string(), created, false};
    }
    return m;
  });
  r.history = model.history;
  r.best_step = model.best_step;
  r.best_val_loss = model.best_val_loss;
  r.stopped_reason = model.stopped_reason;
  r.steps_run = model.steps_run;

  const LogProbTable p_model = stage("model_table", [&] { return model_table(model.params, cfg.space); });

  const std::vector<std::uint64_t> ks = metric_ks(cfg);
  std::vector<ModeSet> truth_modes;
  std::vector<ModeSet> model_modes;
  stage("metrics", [&] {
    for (std::uint64_t k : ks) {
      KMetrics m;
      m.k = k;
      ModeSet st = mode_set(d.truth, k);
      const ModeSet se = mode_set(d.empirical, k);
      m.truth_modes = st.members.size();
      m.emp_modes = se.members.size();
      m.truth_emp = recovery_cost(st, d.empirical);
      m.truth_model = recovery_cost(st, p_model);
      m.emp_model = recovery_cost(se, p_model);
      m.log_rate = cost_reduction_log_rate(m.truth_emp, m.truth_model);
      r.metrics.push_back(m);
      truth_modes.push_back(std::move(st));
      model_modes.push_back(mode_set(p_model, k));
    }
  });

  for (DecodeKind kind : {DecodeKind::beam, DecodeKind::ancestral}) {
    const char* name = kind == DecodeKind::beam ? "decode_beam" : "decode_ancestral";
    DecoderResult dr = stage(name, [&] {
      DecoderResult out;
      out.kind = kind;
      const DecodeConfig dc = cfg.decode_config(kind, job.seed);
      if (kind == DecodeKind::beam) {
        for (const auto& s : beam_search(model.params, cfg.space, dc)) out.decoded.push_back(s.id);
      } else {
        AncestralResult a = ancestral_unique(model.params, cfg.space, dc);
        out.decoded = std::move(a.ids);
        out.attempts = a.attempts;
        out.exhausted = a.exhausted;
      }
      std::sort(out.decoded.begin(), out.decoded.end());
      const LogProbTable p_f = decoding_induced_table(p_model, out.decoded);
      for (std::size_t i = 0; i < ks.size(); ++i) {
        DecoderKMetrics m;
        m.k = ks[i];
        m.model_modes = model_modes[i].members.size();
        m.overlap_model = mode_overlap(model_modes[i], p_f);
        m.overlap_truth = mode_overlap(truth_modes[i], p_f);
        m.overlap_reduction = overlap_reduction(m.overlap_truth, m.overlap_model);
        out.per_k.push_back(m);
      }
      return out;
    });
    r.decoders.push_back(std::move(dr));
  }
  r.seconds = seconds_since(t0);
  return r;
}

std::vector<ChainJob> grid_jobs(const ExperimentConfig& cfg) {
  std::vector<ChainJob> jobs;
  for (double a : cfg.alphas) {
    for (auto n : cfg.n_train) {
      for (auto h : cfg.hidden_sizes) {
        for (auto s : cfg.seeds) jobs.push_back({a, n, h, s});
      }
    }
  }
  return jobs;
}

GridResult run_grid(const ExperimentConfig& cfg, std::span<const ChainJob> jobs, unsigned threads,
                    const ArtifactCache* cache) {
  cfg.validate();
  const auto t0 = Clock::now();
  GridResult g;
  g.outcomes.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      JobOutcome& out = g.outcomes[i];
      out.job = jobs[i];
      try {
        out.result = run_chain_once(cfg, jobs[i], cache);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
      const std::size_t n = ++done;
      std::string msg = "[" + std::to_string(n) + "/" + std::to_string(jobs.size()) + "] " + job_label(jobs[i]);
      if (out.result) {
        const bool cached = out.result->model_artifact.cached;
        char secs[32];
        std::snprintf(secs, sizeof secs, " %.1fs", out.result->seconds);
        log_info(msg + secs + (cached ? " (cached)" : ""));
      } else {
        log(LogLevel::error, msg + " failed: " + out.error);
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  g.wall_seconds = seconds_since(t0);
  g.threads = n_threads;
  return g;
}

namespace {

struct CellKey {
  double alpha;
  std::uint64_t n_train;
  std::uint32_t hidden_size;
  auto operator<=>(const CellKey&) const = default;
};

// Results of one grid cell in config seed order, failed jobs skipped.
std::map<CellKey, std::vector<const ChainResult*>> by_cell(const ExperimentConfig& cfg,
                                                           std::span<const JobOutcome> outcomes) {
  std::map<CellKey, std::map<std::uint64_t, const ChainResult*>> tmp;
  for (const auto& o : outcomes) {
    if (o.result) tmp[{o.job.alpha, o.job.n_train, o.job.hidden_size}][o.job.seed] = &*o.result;
  }
  std::map<CellKey, std::vector<const ChainResult*>> out;
  for (auto& [key, seeds] : tmp) {
    auto& v = out[key];
    for (auto s : cfg.seeds) {
      if (auto it = seeds.find(s); it != seeds.end()) v.push_back(it->second);
    }
  }
  return out;
}

const KMetrics& metrics_at(const ChainResult& r, std::uint64_t k) {
  for (const auto& m : r.metrics) {
    if (m.k == k) return m;
  }
  throw ValidationError("no metrics recorded for k=" + std::to_string(k));
}

const DecoderKMetrics& decoder_at(const ChainResult& r, DecodeKind kind, std::uint64_t k) {
  for (const auto& d : r.decoders) {
    if (d.kind != kind) continue;
    for (const auto& m : d.per_k) {
      if (m.k == k) return m;
    }
  }
  throw ValidationError("no decoder metrics recorded for k=" + std::to_string(k));
}

template <class F>
CurvePoint point_over(const std::vector<const ChainResult*>& results, double x, F&& value) {
  std::vector<std::optional<double>> vals;
  for (const ChainResult* r : results) vals.push_back(value(*r));
  return aggregate(x, vals);
}

}  // namespace

std::map<std::string, std::vector<CurveRow>> compute_curves(const ExperimentConfig& cfg,
                                                            std::span<const JobOutcome> outcomes) {
  const auto cells = by_cell(cfg, outcomes);
  std::map<std::string, std::vector<CurveRow>> files;
  auto cell = [&](double a, std::uint64_t n, std::uint32_t h) -> const std::vector<const ChainResult*>* {
    auto it = cells.find({a, n, h});
    return it == cells.end() ? nullptr : &it->second;
  };
  const auto hs_first = cfg.hidden_sizes.front();

  // The empirical distribution does not depend on the learned model, so the
  // first hidden size's jobs stand for the cell.
  auto& fig1 = files["fig1_emp_cost_vs_k.csv"];
  auto& fig2 = files["fig2_emp_cost_vs_n.csv"];
  for (double a : cfg.alphas) {
    for (auto n : cfg.n_train) {
      const auto* rs = cell(a, n, hs_first);
      if (!rs) continue;
      for (auto k : cfg.k_grid) {
        fig1.push_back({a, n, "none", point_over(*rs, static_cast<double>(k), [&](const ChainResult& r) {
                          return cost_of(metrics_at(r, k).truth_emp);
                        })});
      }
    }
    for (auto n : cfg.n_train) {
      const auto* rs = cell(a, n, hs_first);
      if (!rs) continue;
      fig2.push_back({a, n, "none", point_over(*rs, static_cast<double>(n), [&](const ChainResult& r) {
                        return cost_of(metrics_at(r, cfg.k_fixed).truth_emp);
                      })});
    }
  }

  for (auto h : cfg.hidden_sizes) {
    const std::string suffix = "_hs" + std::to_string(h) + ".csv";
    auto& fig3 = files["fig3_log_rate_vs_k" + suffix];
    auto& fig4 = files["fig4_emp_model_cost_vs_n" + suffix];
    auto& fig5 = files["fig5_overlap_vs_k" + suffix];
    auto& fig5r = files["fig5_overlap_reduction_vs_k" + suffix];
    for (double a : cfg.alphas) {
      for (auto n : cfg.n_train) {
        const auto* rs = cell(a, n, h);
        if (!rs) continue;
        for (auto k : cfg.k_grid) {
          fig3.push_back({a, n, "none", point_over(*rs, static_cast<double>(k), [&](const ChainResult& r) {
                            return metrics_at(r, k).log_rate;
                          })});
        }
      }
      for (auto n : cfg.n_train) {
        const auto* rs = cell(a, n, h);
        if (!rs) continue;
        fig4.push_back({a, n, "none", point_over(*rs, static_cast<double>(n), [&](const ChainResult& r) {
                          return cost_of(metrics_at(r, cfg.k_fixed).emp_model);
                        })});
      }
      for (auto n : cfg.n_train) {
        const auto* rs = cell(a, n, h);
        if (!rs) continue;
        for (DecodeKind kind : {DecodeKind::beam, DecodeKind::ancestral}) {
          const std::string dec(to_string(kind));
          for (auto k : cfg.k_grid) {
            const double x = static_cast<double>(k);
            fig5.push_back({a, n, dec, point_over(*rs, x, [&](const ChainResult& r) -> std::optional<double> {
                              return static_cast<double>(decoder_at(r, kind, k).overlap_model);
                            })});
            fig5r.push_back({a, n, dec, point_over(*rs, x, [&](const ChainResult& r) -> std::optional<double> {
                               return static_cast<double>(decoder_at(r, kind, k).overlap_reduction);
                             })});
          }
        }
      }
    }
  }
  return files;
}

std::string metrics_csv(std::span<const JobOutcome> outcomes) {
  std::string out =
      "alpha,n_train,hidden_size,seed,omega,k,truth_modes,truth_emp_cost,truth_emp_overlap,truth_model_cost,"
      "truth_model_overlap,emp_modes,emp_model_cost,emp_model_overlap,log_rate\n";
  auto cost = [](const RecoveryOutcome& o) {
    const auto c = cost_of(o);
    return c ? std::to_string(static_cast<std::uint64_t>(*c)) : std::string();
  };
  for (const auto& o : outcomes) {
    if (!o.result) continue;
    const ChainResult& r = *o.result;
    const std::string prefix = format_real(r.job.alpha) + ',' + std::to_string(r.job.n_train) + ',' +
                               std::to_string(r.job.hidden_size) + ',' + std::to_string(r.job.seed) + ',' +
                               std::to_string(r.omega) + ',';
    for (const auto& m : r.metrics) {
      out += prefix + std::to_string(m.k) + ',' + std::to_string(m.truth_modes) + ',' + cost(m.truth_emp) + ',' +
             std::to_string(overlap_of(m.truth_emp, m.truth_modes)) + ',' + cost(m.truth_model) + ',' +
             std::to_string(overlap_of(m.truth_model, m.truth_modes)) + ',' + std::to_string(m.emp_modes) + ',' +
             cost(m.emp_model) + ',' + std::to_string(overlap_of(m.emp_model, m.emp_modes)) + ',' +
             (m.log_rate ? format_real(*m.log_rate) : std::string()) + '\n';
    }
  }
  return out;
}

std::string decoder_metrics_csv(std::span<const JobOutcome> outcomes) {
  std::string out =
      "alpha,n_train,hidden_size,seed,decoder,n_decoded,attempts,exhausted,k,model_modes,overlap_model,"
      "overlap_truth,overlap_reduction\n";
  for (const auto& o : outcomes) {
    if (!o.result) continue;
    const ChainResult& r = *o.result;
    for (const auto& d : r.decoders) {
      const std::string prefix = format_real(r.job.alpha) + ',' + std::to_string(r.job.n_train) + ',' +
                                 std::to_string(r.job.hidden_size) + ',' + std::to_string(r.job.seed) + ',' +
                                 std::string(to_string(d.kind)) + ',' + std::to_string(d.decoded.size()) + ',' +
                                 std::to_string(d.attempts) + ',' + (d.exhausted ? "1" : "0") + ',';
      for (const auto& m : d.per_k) {
        out += prefix + std::to_string(m.k) + ',' + std::to_string(m.model_modes) + ',' +
               std::to_string(m.overlap_model) + ',' + std::to_string(m.overlap_truth) + ',' +
               std::to_string(m.overlap_reduction) + '\n';
      }
    }
  }
  return out;
}

namespace {

std::string histories_csv(std::span<const JobOutcome> outcomes) {
  std::string out = "alpha,n_train,hidden_size,seed,step,train_loss,val_loss\n";
  for (const auto& o : outcomes) {
    if (!o.result) continue;
    const ChainResult& r = *o.result;
    for (const auto& h : r.history) {
      out += format_real(r.job.alpha) + ',' + std::to_string(r.job.n_train) + ',' +
             std::to_string(r.job.hidden_size) + ',' + std::to_string(r.job.seed) + ',' + std::to_string(h.step) +
             ',' + format_real(h.train_loss) + ',' + format_real(h.val_loss) + '\n';
    }
  }
  return out;
}

json artifact_json(const ArtifactInfo& a) {
  return {{"path", a.path}, {"created", a.created}, {"cached", a.cached}};
}

}  // namespace

std::vector<std::string> write_run_outputs(const ExperimentConfig& cfg, const GridResult& grid,
                                           const fs::path& out_dir, const fs::path& cache_root) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  for (const auto& [name, rows] : compute_curves(cfg, grid.outcomes)) {
    write_text_file(out_dir / name, curve_csv(rows));
    files.push_back(name);
  }
  write_text_file(out_dir / "metrics.csv", metrics_csv(grid.outcomes));
  write_text_file(out_dir / "decoder_metrics.csv", decoder_metrics_csv(grid.outcomes));
  write_text_file(out_dir / "histories.csv", histories_csv(grid.outcomes));
  files.insert(files.end(), {"metrics.csv", "decoder_metrics.csv", "histories.csv"});

  json jobs = json::array();
  json timings = json::array();
  std::uint64_t trained = 0;
  std::uint64_t failed = 0;
  for (const auto& o : grid.outcomes) {
    json j = {{"alpha", o.job.alpha}, {"n_train", o.job.n_train}, {"hidden_size", o.job.hidden_size},
              {"seed", o.job.seed}};
    json t = j;
    if (o.result) {
      const ChainResult& r = *o.result;
      if (!r.model_artifact.cached) ++trained;
      j["status"] = "ok";
      j["best_step"] = r.best_step;
      j["steps_run"] = r.steps_run;
      j["stopped_reason"] = std::string(to_string(r.stopped_reason));
      j["truth_table"] = artifact_json(r.truth_artifact);
      j["checkpoint"] = artifact_json(r.model_artifact);
      t["seconds"] = r.seconds;
      t["trained"] = !r.model_artifact.cached;
    } else {
      ++failed;
      j["status"] = "error";
      j["error"] = o.error;
    }
    jobs.push_back(std::move(j));
    timings.push_back(std::move(t));
  }
  // Timings live apart from the manifest so reruns without a cache
  // reproduce the manifest byte for byte.
  json manifest = {{"config_hash", hex64(config_hash(cfg))},
                   {"profile", cfg.profile},
                   {"config", json::parse(config_to_json(cfg))},
                   {"cache_dir", cache_root.string()},
                   {"jobs_total", grid.outcomes.size()},
                   {"jobs_trained", trained},
                   {"jobs_failed", failed},
                   {"files", files},
                   {"jobs", jobs}};
  files.push_back("manifest.json");
  files.push_back("timings.json");
  manifest["files"] = files;
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  const json timing = {{"wall_seconds", grid.wall_seconds}, {"threads", grid.threads}, {"jobs", timings}};
  write_text_file(out_dir / "timings.json", timing.dump(2) + "\n");

  // A run that computed every artifact itself is a cold run; its wall time is
  // kept next to the artifacts so later warm runs can still report it.
  if (!cache_root.empty() && failed == 0 && trained == grid.outcomes.size() && trained > 0) {
    const json record = {{"config_hash", hex64(config_hash(cfg))},
                         {"profile", cfg.profile},
                         {"jobs", trained},
                         {"threads", grid.threads},
                         {"wall_seconds", grid.wall_seconds},
                         {"created", utc_now()}};
    write_json(cold_run_record(cache_root, cfg), record);
  }
  return files;
}

}  // namespace modechain
