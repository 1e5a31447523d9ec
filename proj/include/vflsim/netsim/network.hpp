#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vflsim/error.hpp"
#include "vflsim/protocol/types.hpp"

namespace vflsim::netsim {

using protocol::PartyId;

/// Simulated time in integer nanoseconds, so that sums of phase durations
/// are exact.
using SimDuration = std::chrono::duration<std::int64_t, std::nano>;
using SimTime = SimDuration;  // time since the start of the run

inline SimDuration from_seconds(double s) {
  if (!std::isfinite(s) || s < 0) throw ConfigError("durations must be finite and non-negative");
  return SimDuration(std::llround(s * 1e9));
}

inline double to_seconds(SimDuration d) { return static_cast<double>(d.count()) * 1e-9; }

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class SlowdownScope {
  link,   ///< every directed link draws independently
  party,  ///< each party draws once per iteration; its links share the outcome
};

inline const char* to_string(SlowdownScope s) { return s == SlowdownScope::link ? "link" : "party"; }

struct LinkModel {
  double baseline_bps = 10e6;
  double slowdown_prob = 0.0;
  double divisor = 10.0;
  SlowdownScope scope = SlowdownScope::link;
  double latency_s = 0.0;
  std::uint64_t seed = 0;
  /// Party -> first iteration from which none of its links deliver.
  std::map<PartyId, int> dead;

  void validate() const {
    if (!(baseline_bps > 0) || !std::isfinite(baseline_bps)) {
      throw ConfigError("baseline bandwidth must be positive");
    }
    if (!(slowdown_prob >= 0.0 && slowdown_prob <= 1.0)) {
      throw ConfigError("slowdown probability must lie in [0, 1]");
    }
    if (!(divisor >= 1.0) || !std::isfinite(divisor)) {
      throw ConfigError("bottleneck divisor must be at least 1");
    }
    if (!(latency_s >= 0.0) || !std::isfinite(latency_s)) {
      throw ConfigError("latency must be non-negative");
    }
  }

  /// Uniform [0, 1) draw keyed by (seed, iteration, a, b).
  double draw(int iteration, std::uint64_t a, std::uint64_t b) const {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(iteration)));
    h = splitmix64(h ^ (a << 32 | (b & 0xffffffffULL)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }

  bool party_slowed(int iteration, PartyId p) const {
    return draw(iteration, static_cast<std::uint32_t>(p), 0xffffffffULL) < slowdown_prob;
  }

  bool slowed(int iteration, PartyId src, PartyId dst) const {
    if (slowdown_prob <= 0.0) return false;
    if (scope == SlowdownScope::party) {
      return party_slowed(iteration, src) || party_slowed(iteration, dst);
    }
    return draw(iteration, static_cast<std::uint32_t>(src), static_cast<std::uint32_t>(dst)) <
           slowdown_prob;
  }

  double bandwidth(int iteration, PartyId src, PartyId dst) const {
    return slowed(iteration, src, dst) ? baseline_bps / divisor : baseline_bps;
  }

  bool party_alive(PartyId p, int iteration) const {
    const auto it = dead.find(p);
    return it == dead.end() || iteration < it->second;
  }

  bool delivers(PartyId src, PartyId dst, int iteration) const {
    return party_alive(src, iteration) && party_alive(dst, iteration);
  }

  /// Time on the wire for a payload, or nullopt when the link is dead.
  std::optional<SimDuration> transfer_time(std::size_t bytes, int iteration, PartyId src,
                                           PartyId dst) const {
    if (!delivers(src, dst, iteration)) return std::nullopt;
    const double bits = 8.0 * static_cast<double>(bytes);
    return from_seconds(bits / bandwidth(iteration, src, dst) + latency_s);
  }
};

/// Min-queue on (time, insertion sequence); equal times pop in FIFO order.
template <class Payload>
class EventQueue {
 public:
  struct Entry {
    SimTime time;
    std::uint64_t seq;
    Payload payload;
  };

  std::uint64_t push(SimTime time, Payload payload) {
    const std::uint64_t seq = next_seq_++;
    heap_.push(Entry{time, seq, std::move(payload)});
    return seq;
  }

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  SimTime next_time() const { return heap_.top().time; }

  Entry pop() {
    Entry e = std::move(const_cast<Entry&>(heap_.top()));
    heap_.pop();
    return e;
  }

 private:
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

/// Monotone simulation clock plus per-party busy markers.
class SimClock {
 public:
  explicit SimClock(std::size_t parties = 0) : busy_until_(parties, SimTime::zero()) {}

  SimTime now() const { return now_; }
  void advance_to(SimTime t) {
    if (t < now_) throw Error("simulation clock moved backwards");
    now_ = t;
  }

  SimTime busy_until(PartyId p) const { return busy_until_.at(static_cast<std::size_t>(p)); }

  /// Reserves `duration` of party p's time starting no earlier than `ready`.
  /// Returns the start; the party is then busy until start + duration.
  SimTime reserve(PartyId p, SimTime ready, SimDuration duration) {
    auto& b = busy_until_.at(static_cast<std::size_t>(p));
    const SimTime start = std::max({ready, b, now_});
    b = start + duration;
    return start;
  }

 private:
  SimTime now_{};
  std::vector<SimTime> busy_until_;
};

struct TraceRecord {
  PartyId src = 0;
  PartyId dst = 0;
  std::string type;
  int iteration = 0;
  std::size_t bytes = 0;
  SimTime send_at{};
  std::optional<SimTime> deliver_at;  ///< empty when the link is dead
};

inline nlohmann::ordered_json to_json(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["src"] = r.src;
  j["dst"] = r.dst;
  j["type"] = r.type;
  j["iteration"] = r.iteration;
  j["bytes"] = r.bytes;
  j["send_ns"] = r.send_at.count();
  if (r.deliver_at) {
    j["deliver_ns"] = r.deliver_at->count();
  } else {
    j["deliver_ns"] = nullptr;
  }
  return j;
}

/// Message bookkeeping for a run: every send goes through here so byte
/// totals and the trace agree exactly.
class Network {
 public:
  explicit Network(LinkModel link) : link_(std::move(link)) { link_.validate(); }

  const LinkModel& link() const { return link_; }

  /// Records the message and returns its delivery time.
  std::optional<SimTime> send(std::string type, std::size_t bytes, PartyId src, PartyId dst,
                              SimTime now, int iteration) {
    const auto transfer = link_.transfer_time(bytes, iteration, src, dst);
    TraceRecord r{src, dst, std::move(type), iteration, bytes, now, std::nullopt};
    if (transfer) r.deliver_at = now + *transfer;
    total_bytes_ += bytes;
    ++messages_;
    trace_.push_back(std::move(r));
    return trace_.back().deliver_at;
  }

  std::size_t total_bytes() const { return total_bytes_; }
  std::size_t message_count() const { return messages_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }

  void write_trace_jsonl(std::ostream& out) const {
    for (const auto& r : trace_) out << to_json(r).dump() << '\n';
  }

 private:
  LinkModel link_;
  std::vector<TraceRecord> trace_;
  std::size_t total_bytes_ = 0;
  std::size_t messages_ = 0;
};

/// Guest wait in one round: the (K - backups)-th smallest of the K host to
/// Guest transfer times for a payload. Hosts are 1..K, the Guest is 0.
inline SimDuration round_comm_time(int hosts, int backups, const LinkModel& link,
                                   std::size_t payload_bytes, int iteration) {
  if (hosts < 1 || backups < 0 || backups >= hosts) {
    throw ConfigError("round_comm_time needs 0 <= backups < hosts");
  }
  std::vector<SimDuration> times;
  for (PartyId k = 1; k <= hosts; ++k) {
    const auto t = link.transfer_time(payload_bytes, iteration, k, protocol::kGuest);
    if (!t) throw ConfigError("round_comm_time: a host link is dead");
    times.push_back(*t);
  }
  const auto idx = static_cast<std::size_t>(hosts - backups - 1);
  std::nth_element(times.begin(), times.begin() + static_cast<long>(idx), times.end());
  return times[idx];
}

/// Average of round_comm_time over iterations 1..rounds, in seconds.
inline double mean_round_comm_time(int hosts, int backups, const LinkModel& link,
                                   std::size_t payload_bytes, int rounds) {
  double sum = 0.0;
  for (int r = 1; r <= rounds; ++r) {
    sum += to_seconds(round_comm_time(hosts, backups, link, payload_bytes, r));
  }
  return sum / rounds;
}

}  // namespace vflsim::netsim
