#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vflsim/error.hpp"
#include "vflsim/protocol/messages.hpp"
#include "vflsim/protocol/party_ops.hpp"

namespace vflsim::straggler {

using protocol::ForwardShare;
using protocol::PartyId;

/// What to do with a host whose fresh share has not arrived.
enum class BackupMode {
  stale,  ///< substitute the host's most recent cached share
  drop,   ///< leave the host out of the residual altogether
};

inline const char* to_string(BackupMode m) { return m == BackupMode::stale ? "stale" : "drop"; }

/// Latest forward share seen from each host, keyed by host id.
template <class Cipher>
class BackupCache {
 public:
  /// Keeps the share unless a newer iteration is already cached.
  void store(const ForwardShare<Cipher>& share) {
    auto it = entries_.find(share.party);
    if (it == entries_.end() || share.iteration >= it->second->iteration) {
      entries_[share.party] = std::make_shared<const ForwardShare<Cipher>>(share);
    }
  }

  /// Replacing an entry never mutates a share already handed out.
  std::shared_ptr<const ForwardShare<Cipher>> find(PartyId host) const {
    auto it = entries_.find(host);
    return it == entries_.end() ? nullptr : it->second;
  }

  /// current_iteration minus the cached iteration, or nullopt when empty.
  std::optional<int> age(PartyId host, int current_iteration) const {
    const auto s = find(host);
    if (!s) return std::nullopt;
    return current_iteration - s->iteration;
  }

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::map<PartyId, std::shared_ptr<const ForwardShare<Cipher>>> entries_;
};

struct ReceiveLog {
  int iteration = 0;
  std::vector<PartyId> arrival_order;  ///< fresh hosts used this round, by arrival
  std::vector<PartyId> compensated;    ///< hosts filled from the cache (or dropped)
  std::vector<int> compensated_ages;   ///< parallel to compensated; 0 in drop mode
};

enum class GuardAction { compensate, block };

/// A cached share may stand in only while it is younger than max_age.
inline GuardAction staleness_guard(int age, int max_age) {
  if (max_age < 1) throw ConfigError("max_staleness must be at least 1");
  return age < max_age ? GuardAction::compensate : GuardAction::block;
}

/// Hosts that force the round to wait: any whose age reaches the cap.
inline std::vector<std::size_t> staleness_guard(std::span<const int> ages, int max_age) {
  std::vector<std::size_t> blocking;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (staleness_guard(ages[i], max_age) == GuardAction::block) blocking.push_back(i);
  }
  return blocking;
}

/// One share slot per host, in host order. Null only for dropped hosts.
template <class Cipher>
struct RoundShares {
  std::vector<std::shared_ptr<const ForwardShare<Cipher>>> slots;
  ReceiveLog log;

  std::vector<const ForwardShare<Cipher>*> views() const {
    std::vector<const ForwardShare<Cipher>*> out;
    for (const auto& s : slots) out.push_back(s.get());
    return out;
  }
};

/// Gathers forward shares for a single iteration on the Guest.
///
/// Fresh shares are fed in arrival order through receive(); ready() is
/// re-evaluated after each one. Every fresh share also goes into the cache,
/// including ones that turn up after the round has moved on.
template <class Cipher>
class RoundCollector {
 public:
  RoundCollector(int iteration, std::vector<PartyId> hosts, int backups, int max_age,
                 BackupMode mode, BackupCache<Cipher>& cache)
      : iteration_(iteration),
        hosts_(std::move(hosts)),
        backups_(iteration <= 1 ? 0 : backups),
        max_age_(max_age),
        mode_(mode),
        cache_(&cache) {
    const int k = static_cast<int>(hosts_.size());
    if (backups < 0 || (k > 0 && backups >= k) || (k == 0 && backups != 0)) {
      throw ConfigError("backup_workers must satisfy 0 <= beta < K");
    }
    if (max_age < 1) throw ConfigError("max_staleness must be at least 1");
  }

  int iteration() const { return iteration_; }

  void receive(const ForwardShare<Cipher>& share) {
    if (share.iteration != iteration_) {
      throw ProtocolError("collector for iteration " + std::to_string(iteration_) +
                          " got a share for iteration " + std::to_string(share.iteration));
    }
    if (std::find(hosts_.begin(), hosts_.end(), share.party) == hosts_.end()) {
      throw ProtocolError("share from unknown host " + std::to_string(share.party));
    }
    if (std::find(fresh_.begin(), fresh_.end(), share.party) != fresh_.end()) {
      throw ProtocolError("duplicate share from host " + std::to_string(share.party));
    }
    fresh_.push_back(share.party);
    cache_->store(share);
  }

  std::size_t fresh_count() const { return fresh_.size(); }

  /// Whether the Guest may build the residual now.
  bool ready() const {
    const std::size_t k = hosts_.size();
    if (fresh_.size() == k) return true;
    if (fresh_.size() + static_cast<std::size_t>(backups_) < k) return false;
    if (mode_ == BackupMode::drop) return true;
    for (PartyId h : hosts_) {
      if (is_fresh(h)) continue;
      const auto age = cache_->age(h, iteration_);
      if (!age || staleness_guard(*age, max_age_) == GuardAction::block) return false;
    }
    return true;
  }

  /// Hosts the round is currently waiting on, i.e. missing and not
  /// compensable. Empty once ready().
  std::vector<PartyId> blocking_hosts() const {
    std::vector<PartyId> out;
    if (ready()) return out;
    const bool short_of_fresh = fresh_.size() + static_cast<std::size_t>(backups_) < hosts_.size();
    for (PartyId h : hosts_) {
      if (is_fresh(h)) continue;
      if (short_of_fresh) {
        out.push_back(h);
        continue;
      }
      const auto age = cache_->age(h, iteration_);
      if (mode_ == BackupMode::drop || (age && *age < max_age_)) continue;
      out.push_back(h);
    }
    return out;
  }

  /// Snapshot of the slots once ready().
  RoundShares<Cipher> take() const {
    if (!ready()) throw ProtocolError("round taken before enough shares arrived");
    RoundShares<Cipher> out;
    out.log.iteration = iteration_;
    out.log.arrival_order = fresh_;
    for (PartyId h : hosts_) {
      if (is_fresh(h)) {
        out.slots.push_back(cache_->find(h));
      } else if (mode_ == BackupMode::stale) {
        out.slots.push_back(cache_->find(h));
        out.log.compensated.push_back(h);
        out.log.compensated_ages.push_back(*cache_->age(h, iteration_));
      } else {
        out.slots.push_back(nullptr);
        out.log.compensated.push_back(h);
        out.log.compensated_ages.push_back(0);
      }
    }
    return out;
  }

 private:
  bool is_fresh(PartyId h) const {
    return std::find(fresh_.begin(), fresh_.end(), h) != fresh_.end();
  }

  int iteration_;
  std::vector<PartyId> hosts_;
  int backups_;
  int max_age_;
  BackupMode mode_;
  BackupCache<Cipher>* cache_;
  std::vector<PartyId> fresh_;
};

template <class Cipher>
struct TimedShare {
  std::int64_t time = 0;
  ForwardShare<Cipher> share;
};

template <class Cipher>
struct CollectResult {
  RoundShares<Cipher> round;
  /// Arrival time that made the round ready, or nullopt if it never was.
  std::optional<std::int64_t> ready_at;
};

/// Offline form of the collector: replays arrivals in time order (ties
/// keep input order) and stops at the first moment the round is ready.
/// Arrivals after that point are still written to the cache.
template <class Cipher>
CollectResult<Cipher> collect_shares(std::vector<TimedShare<Cipher>> arrivals, int iteration,
                                     const std::vector<PartyId>& hosts, int backups, int max_age,
                                     BackupMode mode, BackupCache<Cipher>& cache) {
  std::stable_sort(arrivals.begin(), arrivals.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  RoundCollector<Cipher> collector(iteration, hosts, backups, max_age, mode, cache);
  CollectResult<Cipher> result;
  std::size_t i = 0;
  if (hosts.empty()) result.ready_at = 0;
  while (!result.ready_at && i < arrivals.size()) {
    const std::int64_t t = arrivals[i].time;
    while (i < arrivals.size() && arrivals[i].time == t) collector.receive(arrivals[i++].share);
    if (collector.ready()) result.ready_at = t;
  }
  if (!result.ready_at) return result;
  result.round = collector.take();
  for (; i < arrivals.size(); ++i) cache.store(arrivals[i].share);
  return result;
}

/// Residual from a mix of fresh and cached shares. Dropped slots are
/// skipped, so the result is the partial sum over hosts that are present.
template <he::HomomorphicScheme Scheme>
protocol::ResidualShare<typename Scheme::cipher_type> compensated_residual(
    const Scheme& scheme, int iteration,
    std::span<const ForwardShare<typename Scheme::cipher_type>* const> slots,
    std::span<const double> guest_u, std::span<const double> y, protocol::ResidualRule rule,
    he::Rng& rng) {
  std::vector<const ForwardShare<typename Scheme::cipher_type>*> present;
  for (const auto* s : slots) {
    if (s != nullptr) present.push_back(s);
  }
  return protocol::guest_residual(
      scheme, iteration,
      std::span<const ForwardShare<typename Scheme::cipher_type>* const>(present), guest_u, y,
      rule, rng);
}

}  // namespace vflsim::straggler
