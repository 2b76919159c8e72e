// modechain: build, cache and analyze learning-chain experiments.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "modechain/binary_io.hpp"
#include "modechain/chain.hpp"
#include "modechain/checkpoint.hpp"
#include "modechain/config.hpp"
#include "modechain/csv.hpp"
#include "modechain/decode.hpp"
#include "modechain/dists.hpp"
#include "modechain/error.hpp"
#include "modechain/log.hpp"
#include "modechain/modes.hpp"
#include "modechain/rng.hpp"
#include "modechain/train.hpp"

namespace fs = std::filesystem;
using namespace modechain;
using nlohmann::json;

namespace {

struct ConfigOpts {
  std::string profile = "default";
  std::string config_path;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--profile", profile, "Built-in profile: default, paper or tiny")->capture_default_str();
    cmd->add_option("--config", config_path, "JSON config file (overrides --profile)");
    cmd->add_option("--set", sets, "Override a field, e.g. --set train.lr=3e-4 (repeatable)");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config_path.empty() ? profile_config(profile) : load_config(config_path);
    for (const auto& s : sets) apply_override(cfg, s);
    cfg.validate();
    return cfg;
  }
};

std::vector<std::uint64_t> parse_u64_list(const std::string& text, const char* what) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.front() == '-') {
      throw ConfigError(std::string(what) + ": not a non-negative integer: " + item);
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string(what) + " must list at least one value");
  return out;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

std::string checksum_hex(std::span<const unsigned char> bytes) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[bytes.size() - 8 + static_cast<std::size_t>(i)];
  return hex64(v);
}

// gen-truth ------------------------------------------------------------------

struct GenTruthOpts {
  ConfigOpts cfg;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::string out;
};

int cmd_gen_truth(const GenTruthOpts& o) {
  const ExperimentConfig cfg = o.cfg.resolve();
  const std::uint64_t seed = o.seed.value_or(cfg.seeds.front());
  const double alpha = o.alpha.value_or(cfg.alphas.front());
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("--alpha: alpha must lie in [0, 1] (got " + format_real(alpha) + ")");
  }
  const GroundTruthSpec spec = cfg.gt_spec(alpha, seed);
  LogProbTable table;
  if (alpha > 0.0) {
    const LstmParams gt = init_params(cfg.gt_dims(), spec.theta_seed);
    table = ground_truth_table(spec, cfg.space, &gt);
  } else {
    table = ground_truth_table(spec, cfg.space, nullptr);
  }
  const auto bytes = encode_table(table);
  write_file(o.out, bytes);
  const json manifest = {{"kind", "ground_truth_table"},
                         {"alpha", alpha},
                         {"seed", seed},
                         {"theta_seed", spec.theta_seed},
                         {"noise_seed", spec.noise_seed},
                         {"mu", spec.mu},
                         {"sigma", spec.sigma},
                         {"omega", table.size()},
                         {"checksum", checksum_hex(bytes)},
                         {"config_hash", hex64(config_hash(cfg))},
                         {"config", json::parse(config_to_json(cfg))}};
  write_text_file(o.out + ".json", manifest.dump(2) + "\n");
  log_info("wrote " + o.out + " (|Omega|=" + std::to_string(table.size()) + ")");
  return 0;
}

// sample-data ----------------------------------------------------------------

struct SampleOpts {
  std::string table;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_sample_data(const SampleOpts& o) {
  const LogProbTable table = load_table(o.table);
  if (o.n < 1) throw ConfigError("--n must be >= 1");
  const Dataset d = sample_dataset(table, o.n, o.seed);
  write_output(o.out, dataset_to_csv(d));
  return 0;
}

// train ----------------------------------------------------------------------

struct TrainOpts {
  ConfigOpts cfg;
  std::string train_csv;
  std::string valid_csv;
  std::optional<std::uint32_t> hidden;
  std::uint64_t seed = 0;
  std::string out;
  std::string history_out;
  std::string table_out;
};

Dataset read_dataset(const std::string& path, std::uint64_t omega) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return dataset_from_csv(ss.str(), omega);
}

int cmd_train(const TrainOpts& o) {
  const ExperimentConfig cfg = o.cfg.resolve();
  const std::uint64_t omega = space_size(cfg.space);
  const Dataset train = read_dataset(o.train_csv, omega);
  const Dataset valid = read_dataset(o.valid_csv, omega);
  const TrainConfig tc = cfg.train_config(o.hidden.value_or(cfg.hidden_sizes.front()), o.seed);
  tc.validate();
  const TrainResult r = train_model(train, valid, tc, cfg.space);
  save_checkpoint(o.out, Checkpoint{r.best_params, tc.seed, r.best_step});
  if (!o.history_out.empty()) write_text_file(o.history_out, history_to_csv(r.history));
  if (!o.table_out.empty()) save_table(o.table_out, model_table(r.best_params, cfg.space));
  log_info("best step " + std::to_string(r.best_step) + ", val loss " + format_real(r.best_val_loss) + ", " +
           std::string(to_string(r.stopped_reason)));
  return 0;
}

// decode ---------------------------------------------------------------------

struct DecodeOpts {
  ConfigOpts cfg;
  std::string checkpoint;
  std::string kind = "beam";
  std::optional<std::uint64_t> width;
  std::uint64_t max_attempts = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_decode(const DecodeOpts& o) {
  const ExperimentConfig cfg = o.cfg.resolve();
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  if (ckpt.params.dims.vocab_size != cfg.space.vocab.size) {
    throw ConfigError("checkpoint vocabulary (" + std::to_string(ckpt.params.dims.vocab_size) +
                      ") does not match space.vocab_size (" + std::to_string(cfg.space.vocab.size) + ")");
  }
  DecodeConfig dc;
  dc.kind = parse_decode_kind(o.kind);
  dc.width_or_unique = o.width.value_or(dc.kind == DecodeKind::beam ? cfg.beam_width : cfg.anc_unique);
  dc.max_attempts = o.max_attempts;
  dc.seed = o.seed;
  dc.validate();
  write_output(o.out, decoded_to_csv(decode(ckpt.params, cfg.space, dc)));
  return 0;
}

// eval-modes -----------------------------------------------------------------

struct EvalOpts {
  std::string p;
  std::string q;
  std::string k_grid = "1,2,5,10,20,50,100";
  std::string out;
};

int cmd_eval_modes(const EvalOpts& o) {
  const LogProbTable p = load_table(o.p);
  const LogProbTable q = load_table(o.q);
  if (p.size() != q.size()) {
    throw ConfigError("table sizes differ: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  }
  const auto ks = parse_u64_list(o.k_grid, "--k-grid");
  for (auto k : ks) {
    if (k < 1 || k >= p.size()) {
      throw ConfigError("--k-grid: k must lie in [1, " + std::to_string(p.size()) + ") (got " + std::to_string(k) + ")");
    }
  }
  // cost_or_omega applies the "failure costs |Omega|" convention.
  std::string csv = "k,modes,status,cost,cost_or_omega,overlap\n";
  for (auto k : ks) {
    const ModeSet s = mode_set(p, k);
    const RecoveryOutcome r = recovery_cost(s, q);
    const std::uint64_t overlap = mode_overlap(s, q);
    csv += std::to_string(k) + ',' + std::to_string(s.members.size()) + ',';
    if (const auto* c = std::get_if<RecoveryCost>(&r)) {
      csv += "ok," + std::to_string(c->cost) + ',' + std::to_string(c->cost);
    } else {
      csv += "failure,," + std::to_string(p.size());
    }
    csv += ',' + std::to_string(overlap) + '\n';
  }
  write_output(o.out, csv);
  return 0;
}

// run ------------------------------------------------------------------------

struct RunOpts {
  ConfigOpts cfg;
  std::string seeds;
  std::optional<std::uint64_t> num_seeds;
  unsigned jobs = 1;
  std::string out = "modechain-out";
  std::string cache_dir;
  bool no_cache = false;
};

int cmd_run(const RunOpts& o) {
  ExperimentConfig cfg = o.cfg.resolve();
  if (!o.seeds.empty()) cfg.seeds = parse_u64_list(o.seeds, "--seeds");
  if (o.num_seeds) {
    if (*o.num_seeds < 1) throw ConfigError("--num-seeds must be >= 1");
    cfg.seeds.clear();
    for (std::uint64_t s = 0; s < *o.num_seeds; ++s) cfg.seeds.push_back(s);
  }
  cfg.validate();
  if (o.jobs < 1) throw ConfigError("--jobs must be >= 1");

  const fs::path cache_root = o.cache_dir.empty() ? default_cache_dir() : fs::path(o.cache_dir);
  std::optional<ArtifactCache> cache;
  if (!o.no_cache) cache.emplace(cache_root);

  const auto jobs = grid_jobs(cfg);
  log_info("profile " + cfg.profile + ": " + std::to_string(jobs.size()) + " jobs on " + std::to_string(o.jobs) +
           " threads, config " + hex64(config_hash(cfg)));
  const GridResult grid = run_grid(cfg, jobs, o.jobs, cache ? &*cache : nullptr);
  const auto files = write_run_outputs(cfg, grid, o.out, o.no_cache ? fs::path() : cache_root);

  std::size_t failed = 0;
  for (const auto& j : grid.outcomes) failed += j.result ? 0 : 1;
  char wall[64];
  std::snprintf(wall, sizeof wall, "%.1f", grid.wall_seconds);
  log_info("wrote " + std::to_string(files.size()) + " files to " + o.out + " in " + wall + "s");
  if (failed) {
    log(LogLevel::error, std::to_string(failed) + " of " + std::to_string(jobs.size()) + " jobs failed");
    return 1;
  }
  return 0;
}

// verify ---------------------------------------------------------------------

struct VerifyOpts {
  std::vector<std::string> paths;
};

// Returns the violated invariants of one artifact (empty when it passes).
std::vector<std::string> verify_one(const std::string& path, std::string& summary) {
  std::vector<std::string> problems;
  std::vector<unsigned char> bytes;
  try {
    bytes = read_file(path);
  } catch (const std::exception& e) {
    return {std::string("unreadable: ") + e.what()};
  }
  const std::string magic =
      bytes.size() >= 4 ? std::string(reinterpret_cast<const char*>(bytes.data()), 4) : std::string();
  if (magic != "MRT1" && magic != "MRC1") return {"bad magic"};
  try {
    (void)checked_payload(bytes);
  } catch (const ValidationError&) {
    return {"bad checksum"};
  }

  if (magic == "MRT1") {
    LogProbTable t;
    try {
      t = decode_table(bytes);
    } catch (const std::exception& e) {
      return {std::string("table layout: ") + e.what()};
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double v = t.values[i];
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        problems.push_back("non-finite entry at id " + std::to_string(i));
        break;
      }
    }
    const double off = std::expm1(t.log_sum_exp());
    if (!(std::abs(off) <= kNormTolerance)) {
      problems.push_back("normalization: exp-sum - 1 = " + format_real(off));
    }
    summary = "table |Omega|=" + std::to_string(t.size()) + " support=" + std::to_string(t.support_size()) +
              " exp-sum-1=" + format_real(off);
  } else {
    try {
      const Checkpoint c = decode_checkpoint(bytes);
      if (!c.params.all_finite()) problems.push_back("non-finite parameter");
      const auto& d = c.params.dims;
      summary = "checkpoint vocab=" + std::to_string(d.vocab_size) + " embed=" + std::to_string(d.embed_dim) +
                " hidden=" + std::to_string(d.hidden_size) + " step=" + std::to_string(c.step);
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  }
  return problems;
}

int cmd_verify(const VerifyOpts& o) {
  int rc = 0;
  for (const auto& p : o.paths) {
    std::string summary;
    const auto problems = verify_one(p, summary);
    if (problems.empty()) {
      std::cout << "PASS " << p << ": " << summary << '\n';
    } else {
      rc = 1;
      std::cout << "FAIL " << p << ":";
      for (const auto& pr : problems) std::cout << ' ' << pr << ';';
      std::cout << '\n';
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modechain: learning-chain mode recovery experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  bool verbose = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");
  app.add_flag("-v,--verbose", verbose, "Log debug messages");

  GenTruthOpts gen;
  auto* c_gen = app.add_subcommand("gen-truth", "Write a ground-truth table and its manifest");
  gen.cfg.attach(c_gen);
  c_gen->add_option("--seed", gen.seed, "Master seed (default: first configured seed)");
  c_gen->add_option("--alpha", gen.alpha, "Mixing coefficient (default: first configured alpha)");
  c_gen->add_option("--out", gen.out, "Output table file")->required();

  SampleOpts smp;
  auto* c_smp = app.add_subcommand("sample-data", "Draw a dataset from a table, as id,count CSV");
  c_smp->add_option("--table", smp.table, "Normalized table file")->required();
  c_smp->add_option("--n", smp.n, "Number of draws")->required();
  c_smp->add_option("--seed", smp.seed, "Sampling seed");
  c_smp->add_option("--out", smp.out, "Output CSV (default stdout)");

  TrainOpts trn;
  auto* c_trn = app.add_subcommand("train", "Train a model on id,count datasets");
  trn.cfg.attach(c_trn);
  c_trn->add_option("--train", trn.train_csv, "Training dataset CSV")->required();
  c_trn->add_option("--valid", trn.valid_csv, "Validation dataset CSV")->required();
  c_trn->add_option("--hidden", trn.hidden, "Hidden size (default: first configured)");
  c_trn->add_option("--seed", trn.seed, "Master seed");
  c_trn->add_option("--out", trn.out, "Output checkpoint")->required();
  c_trn->add_option("--history", trn.history_out, "Write step,train_loss,val_loss CSV");
  c_trn->add_option("--table-out", trn.table_out, "Write the model table over Omega");

  DecodeOpts dec;
  auto* c_dec = app.add_subcommand("decode", "Run beam search or ancestral sampling on a checkpoint");
  dec.cfg.attach(c_dec);
  c_dec->add_option("--checkpoint", dec.checkpoint, "Checkpoint file")->required();
  c_dec->add_option("--kind", dec.kind, "beam or ancestral")->capture_default_str();
  c_dec->add_option("--width", dec.width, "Beam width or unique samples (default from config)");
  c_dec->add_option("--max-attempts", dec.max_attempts, "Ancestral draw cap (default 1000 x width)");
  c_dec->add_option("--seed", dec.seed, "Ancestral sampling seed");
  c_dec->add_option("--out", dec.out, "Output CSV (default stdout)");

  EvalOpts ev;
  auto* c_ev = app.add_subcommand("eval-modes", "Recovery costs and overlaps of S_k(p) under q");
  c_ev->add_option("--p", ev.p, "Source table")->required();
  c_ev->add_option("--q", ev.q, "Target table")->required();
  c_ev->add_option("--k-grid", ev.k_grid, "Comma-separated k values")->capture_default_str();
  c_ev->add_option("--out", ev.out, "Output CSV (default stdout)");

  RunOpts run;
  auto* c_run = app.add_subcommand("run", "Run the experiment grid and write curve CSVs");
  run.cfg.attach(c_run);
  c_run->add_option("--seeds", run.seeds, "Comma-separated seeds (overrides the config)");
  c_run->add_option("--num-seeds", run.num_seeds, "Use seeds 0..N-1");
  c_run->add_option("--jobs,-j", run.jobs, "Parallel jobs")->capture_default_str();
  c_run->add_option("--out", run.out, "Output directory")->capture_default_str();
  c_run->add_option("--cache-dir", run.cache_dir, "Cache root (default $MODECHAIN_CACHE_DIR or .modechain-cache)");
  c_run->add_flag("--no-cache", run.no_cache, "Neither read nor write cached artifacts");

  VerifyOpts ver;
  auto* c_ver = app.add_subcommand("verify", "Check magic, checksum, normalization and checkpoint shape");
  c_ver->add_option("paths", ver.paths, "Table or checkpoint files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (quiet) set_log_level(LogLevel::warn);
  if (verbose) set_log_level(LogLevel::debug);

  try {
    if (c_gen->parsed()) return cmd_gen_truth(gen);
    if (c_smp->parsed()) return cmd_sample_data(smp);
    if (c_trn->parsed()) return cmd_train(trn);
    if (c_dec->parsed()) return cmd_decode(dec);
    if (c_ev->parsed()) return cmd_eval_modes(ev);
    if (c_run->parsed()) return cmd_run(run);
    if (c_ver->parsed()) return cmd_verify(ver);
  } catch (const ConfigError& e) {
    std::cerr << "modechain: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "modechain: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
