#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vflsim/config/runner.hpp"
#include "vflsim/engine/cost_model.hpp"
#include "vflsim/he/key_io.hpp"
#include "vflsim/metrics/metrics.hpp"

namespace fs = std::filesystem;
using namespace vflsim;

namespace {

config::RunConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  config::RunConfig c = path.empty() ? config::RunConfig{} : config::load_config(path);
  if (seed) c.seed = *seed;
  config::validate(c);
  return c;
}

int cmd_keygen(unsigned bits, std::uint64_t seed, const fs::path& out) {
  const auto keys = he::keygen(bits, seed);
  fs::create_directories(out);
  config::write_file(out / "public.key", he::export_public_key(keys.public_key));
  config::write_file(out / "private.key",
                     he::export_private_key(keys.private_key, he::UnsafeExport::allow_private_key));
  std::cout << (out / "public.key").string() << '\n' << (out / "private.key").string() << '\n';
  return 0;
}

int cmd_run(const config::RunConfig& c, const fs::path& out) {
  const auto ds = config::build_dataset(c);
  const auto r = config::execute(c, ds);
  config::write_run_outputs(out, c, r);
  std::ostringstream s;
  metrics::write_summary_header(s);
  metrics::write_summary_row(s, r.metrics);
  std::cout << s.str();
  for (const auto& w : r.metrics.warnings) std::cerr << "warning: " << w << '\n';
  return r.metrics.completed ? 0 : 3;
}

std::string cell_name(int beta, double p, double ratio) {
  std::ostringstream s;
  s << "beta" << beta << "_p" << p << "_r" << ratio;
  return s.str();
}

int cmd_sweep(const config::RunConfig& base, const fs::path& out) {
  const auto ds = config::build_dataset(base);
  fs::create_directories(out / "cells");
  config::write_file(out / "effective_config.json", config::to_json(base).dump(2) + "\n");
  std::ostringstream table;
  metrics::write_summary_header(table, {"backup_workers", "slowdown_prob", "pca_ratio"});
  for (double ratio : base.sweep.pca_ratio) {
    for (double p : base.sweep.slowdown_prob) {
      for (int beta : base.sweep.backup_workers) {
        config::RunConfig c = base;
        c.backup_workers = beta;
        c.slowdown_prob = p;
        c.pca_ratio = ratio < 1.0 ? std::vector<double>(c.feature_counts.size(), ratio)
                                  : std::vector<double>{};
        c.label = cell_name(beta, p, ratio);
        c.write_trace = false;
        const auto r = config::execute(c, ds);
        std::ostringstream m;
        metrics::write_jsonl(m, r.metrics);
        config::write_file(out / "cells" / (c.label + ".jsonl"), m.str());
        std::ostringstream pstr, rstr;
        pstr << p;
        rstr << ratio;
        metrics::write_summary_row(table, r.metrics, {std::to_string(beta), pstr.str(), rstr.str()});
        std::cerr << "done " << c.label << '\n';
      }
    }
  }
  config::write_file(out / "sweep.csv", table.str());
  std::cout << table.str();
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& unit, bool reference,
               const std::string& out) {
  double seconds = 1.0;
  if (unit == "minutes") {
    seconds = 60.0;
  } else if (unit != "seconds") {
    throw ConfigError("--unit must be seconds or minutes");
  }
  std::vector<metrics::ModeTimes> modes;
  for (const auto& item : inputs) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--metrics expects LABEL=PATH, got '" + item + "'");
    std::istringstream in(config::read_file(item.substr(eq + 1)));
    metrics::RunMetrics m;
    m.iterations = metrics::read_jsonl(in);
    modes.push_back(metrics::mode_times(item.substr(0, eq), m, seconds));
  }
  std::ostringstream s;
  metrics::write_mode_table(s, modes, reference ? metrics::reference_table()
                                                : std::vector<metrics::ModeTimes>{});
  if (out.empty()) {
    std::cout << s.str();
  } else {
    config::write_file(out, s.str());
  }
  return 0;
}

int cmd_calibrate(unsigned bits, int samples) {
  const auto keys = he::keygen(bits, 1);
  const auto c = engine::calibrate(keys, samples);
  nlohmann::ordered_json j{{"mode", "model"},
                           {"encrypt_s", c.encrypt_s},
                           {"decrypt_s", c.decrypt_s},
                           {"enc_mul_s", c.enc_mul_s},
                           {"enc_add_s", c.enc_add_s},
                           {"plain_flop_s", c.plain_flop_s}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const AlignmentError*>(&e)) return "alignment";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const ProtocolError*>(&e)) return "protocol";
  return "runtime";
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vertical federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";

  auto* keygen = app.add_subcommand("keygen", "Generate a Paillier key pair");
  unsigned bits = 1024;
  std::uint64_t key_seed = 1;
  keygen->add_option("--bits", bits, "Modulus size in bits")->capture_default_str();
  keygen->add_option("--seed", key_seed, "Key generation seed")->capture_default_str();
  keygen->add_option("--out", out, "Directory for public.key and private.key")->capture_default_str();

  auto* run = app.add_subcommand("run", "Train once and write metrics");
  run->add_option("--config", config_path, "JSON config file; omitted keys take defaults");
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out, "Output directory")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Run the backup x slowdown x ratio grid");
  sweep->add_option("--config", config_path, "JSON config file");
  sweep->add_option("--seed", seed, "Override the config seed");
  sweep->add_option("--out", out, "Output directory")->capture_default_str();

  auto* report = app.add_subcommand("report", "Comp./Comm./Sum table across runs");
  std::vector<std::string> inputs;
  std::string unit = "minutes";
  bool reference = false;
  std::string report_out;
  report->add_option("--metrics", inputs, "LABEL=metrics.jsonl, first one is the baseline")->required();
  report->add_option("--unit", unit, "seconds or minutes")->capture_default_str();
  report->add_flag("--reference", reference, "Append the reference runtime rows");
  report->add_option("--out", report_out, "Write the table here instead of stdout");

  auto* reference_cmd = app.add_subcommand("config-reference", "Print every config key with its default");
  std::string reference_out;
  reference_cmd->add_option("--out", reference_out, "Write to this file instead of stdout");

  auto* calibrate = app.add_subcommand("calibrate", "Measure per-op costs on this machine");
  unsigned cal_bits = 1024;
  int samples = 50;
  calibrate->add_option("--bits", cal_bits, "Modulus size in bits")->capture_default_str();
  calibrate->add_option("--samples", samples, "Operations timed per kind")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*keygen) return cmd_keygen(bits, key_seed, out);
    if (*run) return cmd_run(load(config_path, seed), out);
    if (*sweep) {
      const auto c = load(config_path, seed);
      config::validate_sweep(c);
      return cmd_sweep(c, out);
    }
    if (*report) return cmd_report(inputs, unit, reference, report_out);
    if (*calibrate) return cmd_calibrate(cal_bits, samples);
    if (*reference_cmd) {
      const std::string text = config::reference_markdown();
      if (reference_out.empty()) {
        std::cout << text;
      } else {
        config::write_file(reference_out, text);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << error_kind(e) << ": " << one_line(e.what()) << '\n';
    return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ? 2 : 1;
  }
  return 0;
}
