#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vflsim/data/dataset.hpp"
#include "vflsim/engine/engine.hpp"
#include "vflsim/error.hpp"

namespace vflsim::config {

using json = nlohmann::ordered_json;

struct SynthSource {
  std::size_t rows = 1000;
  std::size_t rank = 8;
  double noise = 0.1;
  double margin = 1.0;
};

struct CsvSource {
  /// Guest table first (it carries the label column), then one per host.
  std::vector<std::string> paths;
  std::string id_column = "id";
  std::string label_column = "label";
};

struct DataConfig {
  std::string source = "synth";  // "synth" or "csv"
  SynthSource synth;
  CsvSource csv;
  bool standardize = true;
};

struct CostConfig {
  std::string mode = "model";  // "model" or "wall_clock"
  /// Per-op costs in seconds; unset ones are derived from key_bits.
  std::optional<double> encrypt_s;
  std::optional<double> decrypt_s;
  std::optional<double> enc_mul_s;
  std::optional<double> enc_add_s;
  std::optional<double> plain_flop_s;
};

struct SweepConfig {
  std::vector<int> backup_workers{0, 1, 2};
  std::vector<double> slowdown_prob{0.0, 0.25, 0.5};
  std::vector<double> pca_ratio{1.0};
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string scheme = "paillier";  // or "plain"
  unsigned key_bits = 1024;
  std::string public_key_path;
  std::string private_key_path;

  int hosts = 3;
  std::vector<std::size_t> feature_counts{10, 10, 10, 10};
  int backup_workers = 0;
  int max_staleness = 2;
  std::string backup_mode = "stale";
  bool arbiter_masking = false;
  bool track_loss = true;

  double learning_rate = 0.05;
  double lambda = 0.0;
  std::string residual_rule = "linear";
  std::string optimizer = "rmsprop";
  std::size_t batch_size = 1024;
  int max_iterations = 50;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;

  double baseline_bps = 10e6;
  double slowdown_prob = 0.0;
  double bottleneck_divisor = 10.0;
  std::string slowdown_scope = "link";
  double latency_s = 0.0;
  std::map<int, int> dead_parties;

  /// Per data party, guest first; empty means no compression.
  std::vector<double> pca_ratio;

  double other_per_iteration_s = 2.0;
  CostConfig cost;
  DataConfig data;
  bool evaluate_auc = true;
  bool write_trace = true;
  std::string label = "run";
  SweepConfig sweep;
};

// ---------------------------------------------------------------------------
// JSON in

namespace detail {

/// Reads fields of one JSON object and rejects any key it was not asked
/// about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + "expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where(key) + "has the wrong type");
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  std::optional<ObjectReader> child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return ObjectReader(j_.at(key), path_.empty() ? key : path_ + "." + key);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
    }
  }

  std::string where(const std::string& key) const {
    return "config key '" + qualified(key) + "' ";
  }

 private:
  std::string qualified(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig from_json(const json& root) {
  RunConfig c;
  detail::ObjectReader r(root, "");
  r.get("seed", c.seed);
  r.get("label", c.label);
  r.get("scheme", c.scheme);
  r.get("key_bits", c.key_bits);
  if (auto k = r.child("keys")) {
    k->get("public", c.public_key_path);
    k->get("private", c.private_key_path);
    k->finish();
  }
  if (auto p = r.child("protocol")) {
    p->get("hosts", c.hosts);
    p->get("feature_counts", c.feature_counts);
    p->get("backup_workers", c.backup_workers);
    p->get("max_staleness", c.max_staleness);
    p->get("backup_mode", c.backup_mode);
    p->get("arbiter_masking", c.arbiter_masking);
    p->get("track_loss", c.track_loss);
    p->finish();
  }
  if (auto t = r.child("training")) {
    t->get("learning_rate", c.learning_rate);
    t->get("lambda", c.lambda);
    t->get("residual_rule", c.residual_rule);
    t->get("optimizer", c.optimizer);
    t->get("batch_size", c.batch_size);
    t->get("max_iterations", c.max_iterations);
    t->get("rmsprop_decay", c.rmsprop_decay);
    t->get("rmsprop_epsilon", c.rmsprop_epsilon);
    t->finish();
  }
  if (auto n = r.child("network")) {
    n->get("baseline_bps", c.baseline_bps);
    n->get("slowdown_prob", c.slowdown_prob);
    n->get("bottleneck_divisor", c.bottleneck_divisor);
    n->get("slowdown_scope", c.slowdown_scope);
    n->get("latency_s", c.latency_s);
    if (n->has("dead_parties")) {
      std::map<std::string, int> raw;
      n->get("dead_parties", raw);
      c.dead_parties.clear();
      for (const auto& [party, it] : raw) {
        try {
          c.dead_parties[std::stoi(party)] = it;
        } catch (const std::exception&) {
          throw ConfigError("config key 'network.dead_parties' needs integer party ids");
        }
      }
    }
    n->finish();
  }
  if (auto p = r.child("compression")) {
    p->get("pca_ratio", c.pca_ratio);
    p->finish();
  }
  if (auto t = r.child("timing")) {
    t->get("other_per_iteration_s", c.other_per_iteration_s);
    if (auto k = t->child("cost")) {
      k->get("mode", c.cost.mode);
      k->get("encrypt_s", c.cost.encrypt_s);
      k->get("decrypt_s", c.cost.decrypt_s);
      k->get("enc_mul_s", c.cost.enc_mul_s);
      k->get("enc_add_s", c.cost.enc_add_s);
      k->get("plain_flop_s", c.cost.plain_flop_s);
      k->finish();
    }
    t->finish();
  }
  if (auto d = r.child("data")) {
    d->get("source", c.data.source);
    d->get("standardize", c.data.standardize);
    if (auto s = d->child("synth")) {
      s->get("rows", c.data.synth.rows);
      s->get("rank", c.data.synth.rank);
      s->get("noise", c.data.synth.noise);
      s->get("margin", c.data.synth.margin);
      s->finish();
    }
    if (auto s = d->child("csv")) {
      s->get("paths", c.data.csv.paths);
      s->get("id_column", c.data.csv.id_column);
      s->get("label_column", c.data.csv.label_column);
      s->finish();
    }
    d->finish();
  }
  if (auto o = r.child("output")) {
    o->get("evaluate_auc", c.evaluate_auc);
    o->get("write_trace", c.write_trace);
    o->finish();
  }
  if (auto s = r.child("sweep")) {
    s->get("backup_workers", c.sweep.backup_workers);
    s->get("slowdown_prob", c.sweep.slowdown_prob);
    s->get("pca_ratio", c.sweep.pca_ratio);
    s->finish();
  }
  r.finish();
  return c;
}

inline RunConfig parse_config(const std::string& text, const std::string& source = "config") {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  return from_json(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream s;
  s << in.rdbuf();
  return parse_config(s.str(), path);
}

// ---------------------------------------------------------------------------
// JSON out

/// The effective configuration with every default filled in. Parsing the
/// result gives back an identical RunConfig.
inline json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["label"] = c.label;
  j["scheme"] = c.scheme;
  j["key_bits"] = c.key_bits;
  j["keys"] = {{"public", c.public_key_path}, {"private", c.private_key_path}};
  j["protocol"] = {{"hosts", c.hosts},
                   {"feature_counts", c.feature_counts},
                   {"backup_workers", c.backup_workers},
                   {"max_staleness", c.max_staleness},
                   {"backup_mode", c.backup_mode},
                   {"arbiter_masking", c.arbiter_masking},
                   {"track_loss", c.track_loss}};
  j["training"] = {{"learning_rate", c.learning_rate},
                   {"lambda", c.lambda},
                   {"residual_rule", c.residual_rule},
                   {"optimizer", c.optimizer},
                   {"batch_size", c.batch_size},
                   {"max_iterations", c.max_iterations},
                   {"rmsprop_decay", c.rmsprop_decay},
                   {"rmsprop_epsilon", c.rmsprop_epsilon}};
  json dead = json::object();
  for (const auto& [p, it] : c.dead_parties) dead[std::to_string(p)] = it;
  j["network"] = {{"baseline_bps", c.baseline_bps},
                  {"slowdown_prob", c.slowdown_prob},
                  {"bottleneck_divisor", c.bottleneck_divisor},
                  {"slowdown_scope", c.slowdown_scope},
                  {"latency_s", c.latency_s},
                  {"dead_parties", dead}};
  j["compression"] = {{"pca_ratio", c.pca_ratio}};
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j["timing"] = {{"other_per_iteration_s", c.other_per_iteration_s},
                 {"cost",
                  {{"mode", c.cost.mode},
                   {"encrypt_s", opt(c.cost.encrypt_s)},
                   {"decrypt_s", opt(c.cost.decrypt_s)},
                   {"enc_mul_s", opt(c.cost.enc_mul_s)},
                   {"enc_add_s", opt(c.cost.enc_add_s)},
                   {"plain_flop_s", opt(c.cost.plain_flop_s)}}}};
  j["data"] = {{"source", c.data.source},
               {"standardize", c.data.standardize},
               {"synth",
                {{"rows", c.data.synth.rows},
                 {"rank", c.data.synth.rank},
                 {"noise", c.data.synth.noise},
                 {"margin", c.data.synth.margin}}},
               {"csv",
                {{"paths", c.data.csv.paths},
                 {"id_column", c.data.csv.id_column},
                 {"label_column", c.data.csv.label_column}}}};
  j["output"] = {{"evaluate_auc", c.evaluate_auc}, {"write_trace", c.write_trace}};
  j["sweep"] = {{"backup_workers", c.sweep.backup_workers},
                {"slowdown_prob", c.sweep.slowdown_prob},
                {"pca_ratio", c.sweep.pca_ratio}};
  return j;
}

// ---------------------------------------------------------------------------
// Validation and conversion

namespace detail {

template <class E>
E pick(const std::string& key, const std::string& value,
       std::initializer_list<std::pair<const char*, E>> options) {
  std::string names;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    names += names.empty() ? name : std::string("|") + name;
  }
  throw ConfigError("config key '" + key + "' must be one of " + names + ", got '" + value + "'");
}

}  // namespace detail

inline engine::CostModel cost_model(const RunConfig& c) {
  engine::CostModel m = engine::CostModel::for_key_bits(static_cast<int>(c.key_bits));
  if (c.cost.encrypt_s) m.encrypt_s = *c.cost.encrypt_s;
  if (c.cost.decrypt_s) m.decrypt_s = *c.cost.decrypt_s;
  if (c.cost.enc_mul_s) m.enc_mul_s = *c.cost.enc_mul_s;
  if (c.cost.enc_add_s) m.enc_add_s = *c.cost.enc_add_s;
  if (c.cost.plain_flop_s) m.plain_flop_s = *c.cost.plain_flop_s;
  m.wall_clock = detail::pick<bool>("timing.cost.mode", c.cost.mode, {{"model", false}, {"wall_clock", true}});
  for (double v : {m.encrypt_s, m.decrypt_s, m.enc_mul_s, m.enc_add_s, m.plain_flop_s}) {
    if (!(v >= 0.0)) throw ConfigError("config key 'timing.cost' values must be >= 0");
  }
  return m;
}

/// Engine settings for this config; the dataset-dependent checks happen in
/// EngineConfig::validate.
inline engine::EngineConfig engine_config(const RunConfig& c) {
  engine::EngineConfig e;
  e.label = c.label;
  e.protocol.hosts = c.hosts;
  e.protocol.backup_workers = c.backup_workers;
  e.protocol.feature_counts = c.feature_counts;
  e.protocol.seed = c.seed;
  e.hyper.learning_rate = c.learning_rate;
  e.hyper.lambda = c.lambda;
  e.hyper.max_iterations = c.max_iterations;
  e.hyper.batch_size = c.batch_size;
  e.hyper.residual_rule = detail::pick<protocol::ResidualRule>(
      "training.residual_rule", c.residual_rule,
      {{"linear", protocol::ResidualRule::linear},
       {"logistic_taylor", protocol::ResidualRule::logistic_taylor}});
  e.hyper.optimizer = detail::pick<protocol::OptimizerKind>(
      "training.optimizer", c.optimizer,
      {{"sgd", protocol::OptimizerKind::sgd}, {"rmsprop", protocol::OptimizerKind::rmsprop}});
  e.hyper.rmsprop_decay = c.rmsprop_decay;
  e.hyper.rmsprop_epsilon = c.rmsprop_epsilon;
  e.link.baseline_bps = c.baseline_bps;
  e.link.slowdown_prob = c.slowdown_prob;
  e.link.divisor = c.bottleneck_divisor;
  e.link.scope = detail::pick<netsim::SlowdownScope>(
      "network.slowdown_scope", c.slowdown_scope,
      {{"link", netsim::SlowdownScope::link}, {"party", netsim::SlowdownScope::party}});
  e.link.latency_s = c.latency_s;
  e.link.seed = c.seed;
  for (const auto& [p, it] : c.dead_parties) e.link.dead[p] = it;
  e.max_staleness = c.max_staleness;
  e.backup_mode = detail::pick<straggler::BackupMode>(
      "protocol.backup_mode", c.backup_mode,
      {{"stale", straggler::BackupMode::stale}, {"drop", straggler::BackupMode::drop}});
  e.pca_ratio = c.pca_ratio;
  e.track_loss = c.track_loss;
  e.evaluate_auc = c.evaluate_auc;
  e.arbiter_masking = c.arbiter_masking;
  e.other_per_iteration_s = c.other_per_iteration_s;
  e.cost = cost_model(c);
  return e;
}

/// Everything that can be checked without loading data.
inline void validate(const RunConfig& c) {
  (void)detail::pick<bool>("scheme", c.scheme, {{"paillier", true}, {"plain", false}});
  (void)detail::pick<bool>("data.source", c.data.source, {{"synth", true}, {"csv", false}});
  const auto e = engine_config(c);
  const std::size_t total = std::accumulate(c.feature_counts.begin(), c.feature_counts.end(), std::size_t{0});
  e.protocol.validate(total);
  e.hyper.validate();
  e.link.validate();
  if (c.max_staleness < 1) throw ConfigError("config key 'protocol.max_staleness' must be >= 1");
  if (!c.pca_ratio.empty() && c.pca_ratio.size() != c.feature_counts.size()) {
    throw ConfigError("config key 'compression.pca_ratio' needs one entry per data party");
  }
  for (std::size_t p = 0; p < c.pca_ratio.size(); ++p) {
    (void)compression::target_dimension(c.feature_counts[p], c.pca_ratio[p]);
  }
  if (c.data.source == "csv" && c.data.csv.paths.size() != c.feature_counts.size()) {
    throw ConfigError("config key 'data.csv.paths' needs one file per data party");
  }
  if (c.data.source == "synth" && (c.data.synth.rank < 1 || c.data.synth.rank > total)) {
    throw ConfigError("config key 'data.synth.rank' must lie in [1, total features]");
  }
}

/// The sweep lists, checked only when a sweep is requested.
inline void validate_sweep(const RunConfig& c) {
  if (c.sweep.backup_workers.empty() || c.sweep.slowdown_prob.empty() || c.sweep.pca_ratio.empty()) {
    throw ConfigError("config key 'sweep' lists must not be empty");
  }
  for (int b : c.sweep.backup_workers) {
    if (b < 0 || b >= std::max(1, c.hosts)) throw ConfigError("config key 'sweep.backup_workers' out of range");
  }
  for (double p : c.sweep.slowdown_prob) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("config key 'sweep.slowdown_prob' out of range");
  }
  for (double r : c.sweep.pca_ratio) {
    for (std::size_t n : c.feature_counts) (void)compression::target_dimension(n, r);
  }
}

inline data::VerticalDataset build_dataset(const RunConfig& c) {
  if (c.data.source == "synth") {
    data::SynthConfig s;
    s.rows = c.data.synth.rows;
    s.features = std::accumulate(c.feature_counts.begin(), c.feature_counts.end(), std::size_t{0});
    s.rank = c.data.synth.rank;
    s.noise = c.data.synth.noise;
    s.margin = c.data.synth.margin;
    s.seed = c.seed;
    auto syn = data::synth(s);
    if (c.data.standardize) data::standardize(syn.x);
    return data::vertical_split(syn.x, syn.y, c.feature_counts, c.seed);
  }
  std::vector<data::PartyTable> tables;
  for (std::size_t p = 0; p < c.data.csv.paths.size(); ++p) {
    data::CsvSchema schema;
    schema.id_column = c.data.csv.id_column;
    if (p == 0) schema.label_column = c.data.csv.label_column;
    tables.push_back(data::load_csv(c.data.csv.paths[p], schema));
  }
  auto ds = data::from_tables(tables);
  if (c.data.standardize) {
    for (auto& part : ds.parts) data::standardize(part);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Reference

/// Description of every leaf key, in the order of to_json.
inline const std::vector<std::pair<std::string, std::string>>& key_docs() {
  static const std::vector<std::pair<std::string, std::string>> docs{
      {"seed", "Seed for data synthesis, key generation, batching, link draws and encryption blinding."},
      {"label", "Name written into the summary row."},
      {"scheme", "paillier (real encryption) or plain (same message flow, no encryption)."},
      {"key_bits", "Paillier modulus size. Below 512 only with VFLSIM_TEST_MODE=1."},
      {"keys.public", "Optional public key file from `vflsim keygen`; empty derives keys from the seed."},
      {"keys.private", "Private key file matching keys.public."},
      {"protocol.hosts", "Number of hosts K. Parties are the guest (0), hosts 1..K and the arbiter K+1."},
      {"protocol.feature_counts", "Features per data party, guest first; K+1 entries."},
      {"protocol.backup_workers", "beta: shares the guest may go without in a round, 0 <= beta < K."},
      {"protocol.max_staleness", "A cached share may stand in while its age is below this bound."},
      {"protocol.backup_mode", "stale (reuse the cached share) or drop (leave the host out)."},
      {"protocol.arbiter_masking", "Parties add a random mask before sending gradients to the arbiter."},
      {"protocol.track_loss", "Compute and decrypt the encrypted training loss every round."},
      {"training.learning_rate", "Step size mu."},
      {"training.lambda", "L2 regularization weight."},
      {"training.residual_rule", "linear or logistic_taylor."},
      {"training.optimizer", "sgd or rmsprop."},
      {"training.batch_size", "Rows per round; at least the row count means full batch."},
      {"training.max_iterations", "Rounds to run."},
      {"training.rmsprop_decay", "RMSProp moving-average decay, in (0, 1)."},
      {"training.rmsprop_epsilon", "RMSProp denominator offset."},
      {"network.baseline_bps", "Link bandwidth in bits per second."},
      {"network.slowdown_prob", "p: chance that a link is slowed in a round."},
      {"network.bottleneck_divisor", "A slowed link runs at baseline_bps divided by this."},
      {"network.slowdown_scope", "link (each directed link draws) or party (a slowed party slows all its links)."},
      {"network.latency_s", "Fixed per-message latency."},
      {"network.dead_parties", "Map of party id to the first round from which its links deliver nothing."},
      {"compression.pca_ratio", "Per data party k/n, guest first; empty or 1.0 disables compression."},
      {"timing.other_per_iteration_s", "Constant 'other' time charged per round."},
      {"timing.cost.mode", "model (per-op costs below) or wall_clock (measured, not reproducible)."},
      {"timing.cost.encrypt_s", "Seconds per encryption; null scales a 1024-bit reference by key_bits."},
      {"timing.cost.decrypt_s", "Seconds per decryption; null derives from key_bits."},
      {"timing.cost.enc_mul_s", "Seconds per ciphertext-scalar multiplication; null derives from key_bits."},
      {"timing.cost.enc_add_s", "Seconds per ciphertext addition; null derives from key_bits."},
      {"timing.cost.plain_flop_s", "Seconds per plaintext floating-point operation."},
      {"data.source", "synth or csv."},
      {"data.standardize", "Scale each feature to zero mean and unit variance after loading."},
      {"data.synth.rows", "Synthetic sample count."},
      {"data.synth.rank", "Rank of the synthetic feature matrix before noise."},
      {"data.synth.noise", "Standard deviation of the additive noise."},
      {"data.synth.margin", "Distance each row is pushed along the true direction; larger is more separable."},
      {"data.csv.paths", "One file per data party, guest first; the guest file holds the labels."},
      {"data.csv.id_column", "Name of the sample id column."},
      {"data.csv.label_column", "Name of the label column in the guest file."},
      {"output.evaluate_auc", "Record full-data AUC every round."},
      {"output.write_trace", "Write trace.jsonl with every simulated message."},
      {"sweep.backup_workers", "beta values for `vflsim sweep`."},
      {"sweep.slowdown_prob", "p values for `vflsim sweep`."},
      {"sweep.pca_ratio", "Compression ratios for `vflsim sweep`, applied to every data party."},
  };
  return docs;
}

inline void collect_leaves(const json& j, const std::string& prefix,
                           std::vector<std::pair<std::string, json>>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object() && path != "network.dead_parties") {
      collect_leaves(value, path, out);
    } else {
      out.emplace_back(path, value);
    }
  }
}

/// Markdown table of every key with its default and meaning.
inline std::string reference_markdown() {
  std::vector<std::pair<std::string, json>> leaves;
  collect_leaves(to_json(RunConfig{}), "", leaves);
  std::map<std::string, std::string> docs(key_docs().begin(), key_docs().end());
  std::ostringstream s;
  s << "# Configuration reference\n\n"
    << "Generated by `vflsim config-reference`. Keys are nested JSON objects; dotted names below\n"
    << "show the nesting. Omitted keys take the default shown. Unknown keys are rejected.\n\n"
    << "| key | default | meaning |\n|---|---|---|\n";
  for (const auto& [path, value] : leaves) {
    const auto it = docs.find(path);
    if (it == docs.end()) throw Error("undocumented config key " + path);
    s << "| `" << path << "` | `" << value.dump() << "` | " << it->second << " |\n";
  }
  return s.str();
}

}  // namespace vflsim::config
