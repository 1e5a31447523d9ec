#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vflsim/error.hpp"
#include "vflsim/he/op_counter.hpp"
#include "vflsim/netsim/network.hpp"

namespace vflsim::metrics {

using netsim::SimDuration;
using netsim::to_seconds;

enum class Phase { computation, encryption, communication, other };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::computation: return "computation";
    case Phase::encryption: return "encryption";
    case Phase::communication: return "communication";
    case Phase::other: return "other";
  }
  return "?";
}

struct PhaseBreakdown {
  SimDuration computation{};
  SimDuration encryption{};
  SimDuration communication{};
  SimDuration other{};

  SimDuration& operator[](Phase p) {
    switch (p) {
      case Phase::computation: return computation;
      case Phase::encryption: return encryption;
      case Phase::communication: return communication;
      case Phase::other: return other;
    }
    throw Error("unknown phase");
  }

  void attribute(Phase p, SimDuration d) {
    if (d < SimDuration::zero()) throw Error("negative duration attributed to " + std::string(to_string(p)));
    (*this)[p] += d;
  }

  SimDuration total() const { return computation + encryption + communication + other; }

  PhaseBreakdown& operator+=(const PhaseBreakdown& o) {
    computation += o.computation;
    encryption += o.encryption;
    communication += o.communication;
    other += o.other;
    return *this;
  }
  friend bool operator==(const PhaseBreakdown&, const PhaseBreakdown&) = default;
};

struct IterationRecord {
  int iteration = 0;
  PhaseBreakdown phases;
  SimDuration start{};
  SimDuration end{};  ///< event-clock time when the iteration's updates finished
  std::optional<double> loss;  ///< decrypted tracked loss, when enabled
  double objective = 0.0;      ///< exact plaintext objective on the batch (monitor only)
  std::optional<double> auc;
  he::OpCounts ops;                 ///< ops performed during this iteration
  std::uint64_t gradient_enc_mul = 0;  ///< enc_mul spent on X^T d products
  std::vector<int> arrival_order;
  std::vector<int> compensated;
  std::vector<int> staleness;
  bool blocked_on_staleness = false;
  std::size_t bytes = 0;
  std::size_t messages = 0;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct RunMetrics {
  std::string label;
  std::vector<IterationRecord> iterations;
  std::vector<std::string> warnings;
  bool completed = true;

  PhaseBreakdown totals() const {
    PhaseBreakdown t;
    for (const auto& r : iterations) t += r.phases;
    return t;
  }
  he::OpCounts total_ops() const {
    he::OpCounts t;
    for (const auto& r : iterations) t += r.ops;
    return t;
  }
  std::uint64_t total_gradient_enc_mul() const {
    std::uint64_t t = 0;
    for (const auto& r : iterations) t += r.gradient_enc_mul;
    return t;
  }
  std::size_t total_bytes() const {
    std::size_t t = 0;
    for (const auto& r : iterations) t += r.bytes;
    return t;
  }
  std::size_t compensation_events() const {
    std::size_t t = 0;
    for (const auto& r : iterations) t += r.compensated.size();
    return t;
  }
  int max_staleness_seen() const {
    int m = 0;
    for (const auto& r : iterations)
      for (int a : r.staleness) m = std::max(m, a);
    return m;
  }
};

// ---------------------------------------------------------------------------
// JSON lines

inline nlohmann::ordered_json to_json(const PhaseBreakdown& p) {
  return {{"computation_ns", p.computation.count()},
          {"encryption_ns", p.encryption.count()},
          {"communication_ns", p.communication.count()},
          {"other_ns", p.other.count()}};
}

inline PhaseBreakdown phases_from_json(const nlohmann::json& j) {
  PhaseBreakdown p;
  p.computation = SimDuration(j.at("computation_ns").get<std::int64_t>());
  p.encryption = SimDuration(j.at("encryption_ns").get<std::int64_t>());
  p.communication = SimDuration(j.at("communication_ns").get<std::int64_t>());
  p.other = SimDuration(j.at("other_ns").get<std::int64_t>());
  return p;
}

inline nlohmann::ordered_json to_json(const he::OpCounts& o) {
  return {{"enc_mul", o.enc_mul},
          {"enc_add", o.enc_add},
          {"encryptions", o.encryptions},
          {"decryptions", o.decryptions}};
}

inline he::OpCounts ops_from_json(const nlohmann::json& j) {
  he::OpCounts o;
  o.enc_mul = j.at("enc_mul").get<std::uint64_t>();
  o.enc_add = j.at("enc_add").get<std::uint64_t>();
  o.encryptions = j.at("encryptions").get<std::uint64_t>();
  o.decryptions = j.at("decryptions").get<std::uint64_t>();
  return o;
}

inline nlohmann::ordered_json to_json(const IterationRecord& r) {
  nlohmann::ordered_json j;
  j["iteration"] = r.iteration;
  j["start_ns"] = r.start.count();
  j["end_ns"] = r.end.count();
  j["phases"] = to_json(r.phases);
  j["total_ns"] = r.phases.total().count();
  j["loss"] = r.loss ? nlohmann::ordered_json(*r.loss) : nlohmann::ordered_json(nullptr);
  j["objective"] = r.objective;
  j["auc"] = r.auc ? nlohmann::ordered_json(*r.auc) : nlohmann::ordered_json(nullptr);
  j["ops"] = to_json(r.ops);
  j["gradient_enc_mul"] = r.gradient_enc_mul;
  j["arrival_order"] = r.arrival_order;
  j["compensated"] = r.compensated;
  j["staleness"] = r.staleness;
  j["blocked_on_staleness"] = r.blocked_on_staleness;
  j["bytes"] = r.bytes;
  j["messages"] = r.messages;
  return j;
}

inline IterationRecord record_from_json(const nlohmann::json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.start = SimDuration(j.at("start_ns").get<std::int64_t>());
  r.end = SimDuration(j.at("end_ns").get<std::int64_t>());
  r.phases = phases_from_json(j.at("phases"));
  if (!j.at("loss").is_null()) r.loss = j.at("loss").get<double>();
  r.objective = j.at("objective").get<double>();
  if (!j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
  r.ops = ops_from_json(j.at("ops"));
  r.gradient_enc_mul = j.at("gradient_enc_mul").get<std::uint64_t>();
  r.arrival_order = j.at("arrival_order").get<std::vector<int>>();
  r.compensated = j.at("compensated").get<std::vector<int>>();
  r.staleness = j.at("staleness").get<std::vector<int>>();
  r.blocked_on_staleness = j.at("blocked_on_staleness").get<bool>();
  r.bytes = j.at("bytes").get<std::size_t>();
  r.messages = j.at("messages").get<std::size_t>();
  return r;
}

inline void write_jsonl(std::ostream& out, const RunMetrics& m) {
  for (const auto& r : m.iterations) out << to_json(r).dump() << '\n';
}

inline std::vector<IterationRecord> read_jsonl(std::istream& in) {
  std::vector<IterationRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("metrics line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summary CSV, one row per run

inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols{
      "label",          "iterations",     "completed",      "computation_s",
      "encryption_s",   "communication_s", "other_s",       "total_s",
      "final_loss",     "final_objective", "final_auc",     "enc_mul",
      "enc_add",        "encryptions",    "decryptions",    "gradient_enc_mul",
      "bytes",          "compensations",  "max_staleness"};
  return cols;
}

inline void write_summary_header(std::ostream& out, const std::vector<std::string>& extra = {}) {
  bool first = true;
  for (const auto& c : extra) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  for (const auto& c : summary_columns()) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  out << '\n';
}

inline void write_summary_row(std::ostream& out, const RunMetrics& m,
                              const std::vector<std::string>& extra = {}) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (const auto& e : extra) s << e << ',';
  const auto t = m.totals();
  const auto ops = m.total_ops();
  auto opt = [&](const std::optional<double>& v) {
    if (v) s << *v;
  };
  s << m.label << ',' << m.iterations.size() << ',' << (m.completed ? 1 : 0) << ','
    << to_seconds(t.computation) << ',' << to_seconds(t.encryption) << ','
    << to_seconds(t.communication) << ',' << to_seconds(t.other) << ','
    << to_seconds(t.total()) << ',';
  if (!m.iterations.empty()) opt(m.iterations.back().loss);
  s << ',';
  if (!m.iterations.empty()) s << m.iterations.back().objective;
  s << ',';
  if (!m.iterations.empty()) opt(m.iterations.back().auc);
  s << ',' << ops.enc_mul << ',' << ops.enc_add << ',' << ops.encryptions << ','
    << ops.decryptions << ',' << m.total_gradient_enc_mul() << ',' << m.total_bytes() << ','
    << m.compensation_events() << ',' << m.max_staleness_seen() << '\n';
  out << s.str();
}

// ---------------------------------------------------------------------------
// Mode comparison in the layout of the runtime table: computation
// (including encryption), communication, and their sum.

struct ModeTimes {
  std::string mode;
  double comp = 0.0;
  double comm = 0.0;
  double sum() const { return comp + comm; }
};

inline ModeTimes mode_times(const std::string& mode, const RunMetrics& m, double unit_seconds = 1.0) {
  const auto t = m.totals();
  return {mode, to_seconds(t.computation + t.encryption) / unit_seconds,
          to_seconds(t.communication) / unit_seconds};
}

/// Reference runtimes, in minutes, for 50 iterations on a 4-party split.
inline std::vector<ModeTimes> reference_table() {
  return {{"Origin", 98.2, 141.0}, {"Backup", 93.6, 48.3}, {"PCA", 58.5, 137.6}, {"Ours", 59.9, 46.4}};
}

/// Percentage reduction from `base` to `value`.
inline double reduction_pct(double base, double value) {
  if (base == 0.0) return 0.0;
  return (base - value) / base * 100.0;
}

inline std::string format_fixed(double v, int digits = 1) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

/// CSV rows: metric, then per mode the value and its reduction relative to
/// the first mode; a reference block follows when given.
inline void write_mode_table(std::ostream& out, const std::vector<ModeTimes>& modes,
                             const std::vector<ModeTimes>& reference = {}) {
  auto block = [&](const std::vector<ModeTimes>& rows, const std::string& source) {
    if (rows.empty()) return;
    out << "source,metric";
    for (const auto& r : rows) out << ',' << r.mode << ',' << r.mode << "_reduction_pct";
    out << '\n';
    const char* names[] = {"Comp.", "Comm.", "Sum"};
    for (int k = 0; k < 3; ++k) {
      auto pick = [&](const ModeTimes& r) { return k == 0 ? r.comp : k == 1 ? r.comm : r.sum(); };
      out << source << ',' << names[k];
      for (const auto& r : rows) {
        out << ',' << format_fixed(pick(r), 3) << ','
            << format_fixed(reduction_pct(pick(rows.front()), pick(r)), 1);
      }
      out << '\n';
    }
  };
  block(modes, "measured");
  block(reference, "reference");
}

}  // namespace vflsim::metrics
