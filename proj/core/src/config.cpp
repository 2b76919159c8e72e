#include "modechain/config.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "modechain/error.hpp"
#include "modechain/rng.hpp"

namespace modechain {

using nlohmann::json;

void ExperimentConfig::validate() const {
  try {
    space.validate();
    (void)space_size(space);
  } catch (const Error& e) {
    throw ConfigError(std::string("space: ") + e.what());
  }
  const std::uint64_t omega = space_size(space);

  if (alphas.empty()) throw ConfigError("ground_truth.alphas must not be empty");
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw ConfigError("ground_truth.alphas: alpha must lie in [0, 1] (got " + std::to_string(a) + ")");
    }
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("ground_truth.sigma must be > 0");
  if (!std::isfinite(mu)) throw ConfigError("ground_truth.mu must be finite");
  if (gt_hidden_size < 1) throw ConfigError("ground_truth.hidden_size must be >= 1");

  if (n_train.empty()) throw ConfigError("n_train must not be empty");
  for (auto n : n_train) {
    if (n < 1) throw ConfigError("n_train entries must be >= 1");
  }

  if (hidden_sizes.empty()) throw ConfigError("train.hidden_sizes must not be empty");
  for (auto h : hidden_sizes) {
    if (h < 1) throw ConfigError("train.hidden_sizes entries must be >= 1");
  }
  train.validate();

  if (beam_width < 1) throw ConfigError("decode.beam_width must be >= 1");
  if (anc_unique < 1) throw ConfigError("decode.anc_unique must be >= 1");
  if (max_attempts_factor < 1) throw ConfigError("decode.max_attempts_factor must be >= 1");

  if (k_grid.empty()) throw ConfigError("k_grid must not be empty");
  for (auto k : k_grid) {
    if (k < 1 || k >= omega) {
      throw ConfigError("k_grid: k must lie in [1, " + std::to_string(omega) + ") (got " + std::to_string(k) + ")");
    }
  }
  if (k_fixed < 1 || k_fixed >= omega) {
    throw ConfigError("k_fixed must lie in [1, " + std::to_string(omega) + ") (got " + std::to_string(k_fixed) + ")");
  }

  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
}

LstmDims ExperimentConfig::gt_dims() const {
  return LstmDims{space.vocab.size, gt_embed_dim ? gt_embed_dim : gt_hidden_size, gt_hidden_size};
}

GroundTruthSpec ExperimentConfig::gt_spec(double alpha, std::uint64_t seed) const {
  // p_theta and x(s) depend on the seed only, so every alpha of one seed
  // mixes the same two components.
  return GroundTruthSpec{alpha, derive_seed(seed, "gt_init"), derive_seed(seed, "noise"), mu, sigma};
}

TrainConfig ExperimentConfig::train_config(std::uint32_t hidden_size, std::uint64_t seed) const {
  TrainConfig t = train;
  t.hidden_size = hidden_size;
  t.seed = derive_seed(seed, "train");
  return t;
}

DecodeConfig ExperimentConfig::decode_config(DecodeKind kind, std::uint64_t seed) const {
  DecodeConfig d;
  d.kind = kind;
  d.width_or_unique = kind == DecodeKind::beam ? beam_width : anc_unique;
  d.max_attempts = max_attempts_factor * d.width_or_unique;
  d.seed = derive_seed(seed, kind == DecodeKind::beam ? "decode_beam" : "decode_ancestral");
  return d;
}

namespace {

std::vector<std::uint64_t> seed_range(std::uint64_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::uint64_t i = 0; i < n; ++i) s[i] = i;
  return s;
}

ExperimentConfig tiny_profile() {
  ExperimentConfig c;
  c.profile = "tiny";
  c.space = SpaceSpec{Vocab{4, 3}, 6};
  c.alphas = {0.0, 0.3, 1.0};
  c.gt_embed_dim = 16;
  c.gt_hidden_size = 16;
  c.n_train = {500, 2000};
  c.hidden_sizes = {16};
  c.train.embed_dim = 0;
  c.train.lr = 3e-3;
  c.train.batch_size = 64;
  c.train.val_interval = 20;
  c.train.patience = 5;
  c.train.max_steps = 1000;
  c.beam_width = 20;
  c.anc_unique = 20;
  c.k_grid = {1, 2, 5, 10, 20};
  c.k_fixed = 10;
  c.seeds = seed_range(2);
  return c;
}

ExperimentConfig default_profile() {
  ExperimentConfig c;
  c.profile = "default";
  c.space = SpaceSpec{Vocab{5, 4}, 8};
  c.alphas = {0.0, 0.3, 1.0};
  c.gt_embed_dim = 64;
  c.gt_hidden_size = 64;
  c.n_train = {2000, 10000, 50000};
  c.hidden_sizes = {32, 64};
  c.train.embed_dim = 0;
  c.train.lr = 3e-3;
  c.train.batch_size = 256;
  c.train.val_interval = 50;
  c.train.patience = 5;
  c.train.max_steps = 4000;
  c.beam_width = 100;
  c.anc_unique = 100;
  c.k_grid = {1, 2, 5, 10, 20, 50, 100};
  c.k_fixed = 20;
  c.seeds = seed_range(10);
  return c;
}

ExperimentConfig paper_profile() {
  ExperimentConfig c;
  c.profile = "paper";
  c.space = SpaceSpec{Vocab{7, 6}, 10};
  c.alphas = {0.0, 0.3, 1.0};
  c.gt_embed_dim = 512;
  c.gt_hidden_size = 512;
  c.n_train = {100000, 500000, 1000000, 5000000, 10000000};
  c.hidden_sizes = {128, 512};
  c.train.embed_dim = 0;
  c.train.lr = 1e-4;
  c.train.batch_size = 5120;
  c.train.val_interval = 500;
  c.train.patience = 5;
  c.train.max_steps = 20000;
  c.beam_width = 500;
  c.anc_unique = 500;
  c.k_grid = {1, 2, 5, 10, 20, 50, 100, 200, 500};
  c.k_fixed = 200;
  c.seeds = seed_range(10);
  return c;
}

json to_json_value(const ExperimentConfig& c) {
  return json{
      {"profile", c.profile},
      {"space", {{"vocab_size", c.space.vocab.size}, {"eos_id", c.space.vocab.eos_id}, {"max_len", c.space.max_len}}},
      {"ground_truth",
       {{"alphas", c.alphas},
        {"mu", c.mu},
        {"sigma", c.sigma},
        {"embed_dim", c.gt_embed_dim},
        {"hidden_size", c.gt_hidden_size}}},
      {"n_train", c.n_train},
      {"train",
       {{"hidden_sizes", c.hidden_sizes},
        {"embed_dim", c.train.embed_dim},
        {"lr", c.train.lr},
        {"batch_size", c.train.batch_size},
        {"val_interval", c.train.val_interval},
        {"patience", c.train.patience},
        {"max_steps", c.train.max_steps}}},
      {"decode",
       {{"beam_width", c.beam_width}, {"anc_unique", c.anc_unique}, {"max_attempts_factor", c.max_attempts_factor}}},
      {"k_grid", c.k_grid},
      {"k_fixed", c.k_fixed},
      {"seeds", c.seeds},
  };
}

// Rejects keys the schema does not know, reporting the dotted path.
void check_keys(const json& given, const json& schema, const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.contains(it.key())) throw ConfigError("unknown config key: " + path);
    if (it.value().is_object()) {
      if (!schema[it.key()].is_object()) throw ConfigError(path + " must not be an object");
      check_keys(it.value(), schema[it.key()], path);
    }
  }
}

const json& at_path(const json& j, std::string_view path) {
  const json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key(path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    cur = &cur->at(key);
    if (dot == std::string_view::npos) return *cur;
    start = dot + 1;
  }
}

template <class T>
T get_field(const json& j, std::string_view path) {
  const json& v = at_path(j, path);
  auto check_one = [&](const json& x) {
    if constexpr (std::is_unsigned_v<T>) {
      if (!x.is_number_unsigned()) throw ConfigError(std::string(path) + " must be a non-negative integer");
      if (x.get<std::uint64_t>() > std::numeric_limits<T>::max()) {
        throw ConfigError(std::string(path) + " is too large");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!x.is_number()) throw ConfigError(std::string(path) + " must be a number");
    } else {
      if (!x.is_string()) throw ConfigError(std::string(path) + " must be a string");
    }
  };
  check_one(v);
  return v.get<T>();
}

template <class T>
std::vector<T> get_list(const json& j, std::string_view path) {
  const json& v = at_path(j, path);
  if (!v.is_array()) throw ConfigError(std::string(path) + " must be a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    json wrapper = json::object();
    wrapper["x"] = v[i];
    out.push_back(get_field<T>(wrapper, "x"));
  }
  return out;
}

ExperimentConfig from_json_fields(const json& j) {
  ExperimentConfig c;
  c.profile = get_field<std::string>(j, "profile");
  c.space.vocab.size = get_field<std::uint32_t>(j, "space.vocab_size");
  c.space.vocab.eos_id = get_field<std::uint32_t>(j, "space.eos_id");
  c.space.max_len = get_field<std::uint32_t>(j, "space.max_len");
  c.alphas = get_list<double>(j, "ground_truth.alphas");
  c.mu = get_field<double>(j, "ground_truth.mu");
  c.sigma = get_field<double>(j, "ground_truth.sigma");
  c.gt_embed_dim = get_field<std::uint32_t>(j, "ground_truth.embed_dim");
  c.gt_hidden_size = get_field<std::uint32_t>(j, "ground_truth.hidden_size");
  c.n_train = get_list<std::uint64_t>(j, "n_train");
  c.hidden_sizes = get_list<std::uint32_t>(j, "train.hidden_sizes");
  c.train.embed_dim = get_field<std::uint32_t>(j, "train.embed_dim");
  c.train.lr = get_field<double>(j, "train.lr");
  c.train.batch_size = get_field<std::uint32_t>(j, "train.batch_size");
  c.train.val_interval = get_field<std::uint32_t>(j, "train.val_interval");
  c.train.patience = get_field<std::uint32_t>(j, "train.patience");
  c.train.max_steps = get_field<std::uint64_t>(j, "train.max_steps");
  c.beam_width = get_field<std::uint64_t>(j, "decode.beam_width");
  c.anc_unique = get_field<std::uint64_t>(j, "decode.anc_unique");
  c.max_attempts_factor = get_field<std::uint64_t>(j, "decode.max_attempts_factor");
  c.k_grid = get_list<std::uint64_t>(j, "k_grid");
  c.k_fixed = get_field<std::uint64_t>(j, "k_fixed");
  c.seeds = get_list<std::uint64_t>(j, "seeds");
  // Defaults for fields the schema does not expose.
  c.train.hidden_size = c.hidden_sizes.empty() ? 1 : c.hidden_sizes.front();
  return c;
}

ExperimentConfig from_json_value(const json& j) {
  try {
    return from_json_fields(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

}  // namespace

std::vector<std::string> profile_names() { return {"default", "paper", "tiny"}; }

ExperimentConfig profile_config(std::string_view name) {
  ExperimentConfig c;
  if (name == "default" || name == "desk") {
    c = default_profile();
  } else if (name == "paper") {
    c = paper_profile();
  } else if (name == "tiny") {
    c = tiny_profile();
  } else {
    throw ConfigError("unknown profile: " + std::string(name) + " (expected default, paper or tiny)");
  }
  c.train.hidden_size = c.hidden_sizes.front();
  return c;
}

std::string config_to_json(const ExperimentConfig& cfg, int indent) { return to_json_value(cfg).dump(indent); }

ExperimentConfig config_from_json(std::string_view text) {
  json given;
  try {
    given = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!given.is_object()) throw ConfigError("config must be a JSON object");
  std::string profile = "default";
  if (given.contains("profile")) {
    if (!given["profile"].is_string()) throw ConfigError("profile must be a string");
    profile = given["profile"].get<std::string>();
  }
  json merged = to_json_value(profile_config(profile));
  check_keys(given, merged, "");
  merged.merge_patch(given);
  ExperimentConfig c = from_json_value(merged);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key=value: " + std::string(assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }

  json patch = value;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};

  json current = to_json_value(cfg);
  check_keys(patch, current, "");
  // An override may not replace a whole section with a scalar.
  if (at_path(current, key).is_object()) throw ConfigError("override must target a leaf field: " + key);
  current.merge_patch(patch);
  ExperimentConfig next = from_json_value(current);
  next.validate();
  cfg = std::move(next);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a64(to_json_value(cfg).dump()); }

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace modechain
