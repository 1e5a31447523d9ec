#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "vflsim/config/run_config.hpp"
#include "vflsim/he/key_io.hpp"

namespace vflsim::config {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

/// Key pair from the configured files, or derived from the seed.
inline he::KeyPair load_or_generate_keys(const RunConfig& c) {
  if (c.public_key_path.empty() != c.private_key_path.empty()) {
    throw ConfigError("config keys 'keys.public' and 'keys.private' must be given together");
  }
  if (c.public_key_path.empty()) return he::keygen(c.key_bits, c.seed);
  auto pk = he::import_public_key(read_file(c.public_key_path));
  auto sk = he::import_private_key(read_file(c.private_key_path), he::UnsafeExport::allow_private_key);
  if (pk.n() != sk.public_key().n()) throw ConfigError("key files do not belong together");
  return {std::move(pk), std::move(sk)};
}

inline engine::RunResult execute(const RunConfig& c, const data::VerticalDataset& ds) {
  const auto e = engine_config(c);
  if (c.scheme == "plain") {
    he::PlainScheme scheme;
    he::PlainDecryptor dec;
    return engine::run_training(scheme, dec, ds, e);
  }
  const auto keys = load_or_generate_keys(c);
  he::PaillierScheme scheme(keys.public_key);
  he::PaillierDecryptor dec(keys.private_key);
  return engine::run_training(scheme, dec, ds, e);
}

inline nlohmann::ordered_json run_summary_json(const engine::RunResult& r) {
  nlohmann::ordered_json j;
  const auto t = r.metrics.totals();
  j["label"] = r.metrics.label;
  j["completed"] = r.metrics.completed;
  j["iterations"] = r.metrics.iterations.size();
  j["warnings"] = r.metrics.warnings;
  j["makespan_ns"] = r.makespan.count();
  j["totals"] = metrics::to_json(t);
  j["total_ns"] = t.total().count();
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto& p : r.final_params) params.push_back(p.theta);
  j["final_params"] = params;
  return j;
}

/// Writes effective_config.json, metrics.jsonl, summary.csv, run.json and,
/// when enabled, trace.jsonl into `dir`.
inline void write_run_outputs(const fs::path& dir, const RunConfig& c, const engine::RunResult& r) {
  fs::create_directories(dir);
  write_file(dir / "effective_config.json", to_json(c).dump(2) + "\n");
  std::ostringstream m;
  metrics::write_jsonl(m, r.metrics);
  write_file(dir / "metrics.jsonl", m.str());
  std::ostringstream s;
  metrics::write_summary_header(s);
  metrics::write_summary_row(s, r.metrics);
  write_file(dir / "summary.csv", s.str());
  write_file(dir / "run.json", run_summary_json(r).dump(2) + "\n");
  if (c.write_trace) {
    std::ostringstream t;
    for (const auto& rec : r.trace) t << netsim::to_json(rec).dump() << '\n';
    write_file(dir / "trace.jsonl", t.str());
  }
}

}  // namespace vflsim::config
