#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "vflsim/error.hpp"
#include "vflsim/linalg/matrix.hpp"

namespace vflsim::protocol {

/// 0 is the Guest, 1..K are Hosts, K + 1 is the Arbiter.
using PartyId = int;
inline constexpr PartyId kGuest = 0;

enum class PartyRole { guest, host, arbiter };

enum class ResidualRule { linear, logistic_taylor };

enum class OptimizerKind { sgd, rmsprop };

inline std::string to_string(ResidualRule r) {
  return r == ResidualRule::linear ? "linear" : "logistic_taylor";
}
inline std::string to_string(OptimizerKind o) { return o == OptimizerKind::sgd ? "sgd" : "rmsprop"; }

struct HyperParams {
  double learning_rate = 0.05;
  double lambda = 0.0;
  int max_iterations = 50;
  std::size_t batch_size = 1024;
  ResidualRule residual_rule = ResidualRule::linear;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;

  /// A batch larger than the sample count means full-batch training.
  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0)) throw ConfigError("rmsprop_decay in (0,1)");
  }
};

struct ModelParams {
  Vector theta;
};

struct ProtocolConfig {
  int hosts = 2;
  int backup_workers = 0;
  /// Guest first, then hosts 1..K.
  std::vector<std::size_t> feature_counts;
  std::uint64_t seed = 1;

  int party_count() const { return hosts + 1; }
  PartyId arbiter() const { return hosts + 1; }

  void validate(std::size_t total_features) const {
    if (hosts < 0) throw ConfigError("hosts must be >= 0");
    if (backup_workers < 0 || (hosts > 0 && backup_workers >= hosts) ||
        (hosts == 0 && backup_workers != 0)) {
      throw ConfigError("backup_workers must satisfy 0 <= beta < K");
    }
    if (feature_counts.size() != static_cast<std::size_t>(hosts) + 1) {
      throw ConfigError("feature_counts needs one entry for the guest plus one per host");
    }
    const std::size_t sum = std::accumulate(feature_counts.begin(), feature_counts.end(),
                                            std::size_t{0});
    if (sum != total_features) {
      throw ConfigError("feature_counts sum to " + std::to_string(sum) + ", dataset has " +
                        std::to_string(total_features));
    }
  }
};

/// Labels as the residual rule expects them: {0,1} for linear, {-1,+1} for
/// the logistic Taylor rule.
inline Vector encode_labels(const Vector& binary, ResidualRule rule) {
  Vector out(binary.size());
  for (std::size_t i = 0; i < binary.size(); ++i) {
    if (binary[i] != 0.0 && binary[i] != 1.0) throw ConfigError("labels must be binary {0,1}");
    out[i] = rule == ResidualRule::linear ? binary[i] : 2.0 * binary[i] - 1.0;
  }
  return out;
}

}  // namespace vflsim::protocol
