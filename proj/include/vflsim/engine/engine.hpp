#pragma once

// Event-driven training simulator. Every party runs the real protocol steps
// from vflsim/protocol on real (or plain) ciphertexts; the simulated clock
// advances by the cost model for each step and by the link model for each
// message. Each step and each transfer becomes a span with a predecessor,
// so the run's critical path can be walked back afterwards and split into
// computation, encryption and communication time.

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "vflsim/compression/pca.hpp"
#include "vflsim/data/dataset.hpp"
#include "vflsim/engine/cost_model.hpp"
#include "vflsim/error.hpp"
#include "vflsim/metrics/metrics.hpp"
#include "vflsim/netsim/network.hpp"
#include "vflsim/protocol/auc.hpp"
#include "vflsim/protocol/party_ops.hpp"
#include "vflsim/straggler/backup.hpp"

namespace vflsim::engine {

using netsim::SimTime;
using protocol::PartyId;

struct EngineConfig {
  protocol::ProtocolConfig protocol;
  protocol::HyperParams hyper;
  netsim::LinkModel link;
  int max_staleness = 2;
  straggler::BackupMode backup_mode = straggler::BackupMode::stale;
  /// Guest first, then hosts. Empty, or 1.0 for a party, means uncompressed.
  std::vector<double> pca_ratio;
  bool track_loss = false;
  bool evaluate_auc = true;
  bool arbiter_masking = false;
  double mask_scale = 1.0;
  double other_per_iteration_s = 2.0;
  CostModel cost;
  bool record_gradients = false;
  std::string label = "run";

  double ratio_for(PartyId p) const {
    return pca_ratio.empty() ? 1.0 : pca_ratio.at(static_cast<std::size_t>(p));
  }

  /// Fills feature_counts from the data when left empty.
  void validate(const data::VerticalDataset& ds) {
    if (ds.parts.size() != static_cast<std::size_t>(protocol.hosts) + 1) {
      throw ConfigError("dataset has " + std::to_string(ds.parts.size()) + " parts, config expects " +
                        std::to_string(protocol.hosts + 1));
    }
    if (ds.rows() == 0) throw ConfigError("dataset has no rows");
    for (const auto& p : ds.parts) {
      if (p.rows() != ds.rows()) throw ConfigError("party row counts differ from the label count");
    }
    if (protocol.feature_counts.empty()) protocol.feature_counts = ds.feature_counts();
    protocol.validate(ds.total_features());
    if (protocol.feature_counts != ds.feature_counts()) {
      throw ConfigError("feature_counts do not match the dataset's parts");
    }
    hyper.validate();
    link.validate();
    if (max_staleness < 1) throw ConfigError("max_staleness must be at least 1");
    if (!pca_ratio.empty() && pca_ratio.size() != ds.parts.size()) {
      throw ConfigError("pca_ratio needs one entry per data party");
    }
    for (std::size_t p = 0; p < pca_ratio.size(); ++p) {
      (void)compression::target_dimension(ds.parts[p].cols(), pca_ratio[p]);
    }
    if (!(other_per_iteration_s >= 0.0)) throw ConfigError("other_per_iteration_s must be >= 0");
    if (!(mask_scale > 0.0)) throw ConfigError("mask_scale must be > 0");
    (void)protocol::encode_labels(ds.y, hyper.residual_rule);
  }
};

struct RunResult {
  metrics::RunMetrics metrics;
  /// Final parameters, one per data party, in the original feature space.
  std::vector<protocol::ModelParams> final_params;
  /// [iteration - 1][party]: parameters right after that iteration's update.
  std::vector<std::vector<Vector>> thetas;
  /// [iteration - 1][party]: the decrypted, unmasked, decompressed gradient.
  /// Filled only with record_gradients.
  std::vector<std::vector<Vector>> gradients;
  std::vector<std::optional<compression::CompressionPlan>> plans;
  std::vector<netsim::TraceRecord> trace;
  SimTime makespan{};
};

namespace detail {

struct Span {
  SimTime start{};
  SimTime end{};
  metrics::Phase phase = metrics::Phase::computation;
  int pred = -1;
};

struct IterationInfo {
  he::OpCounts ops;
  std::uint64_t gradient_enc_mul = 0;
  std::size_t bytes = 0;
  std::size_t messages = 0;
  straggler::ReceiveLog log;
  bool blocked = false;
  std::optional<double> loss;
  std::optional<SimTime> start;
  SimTime end{};
};

inline const char* message_name(std::size_t index) {
  static const char* names[] = {"forward_share", "residual_share", "gradient", "decrypted_gradient"};
  return names[index];
}

template <he::HomomorphicScheme Scheme>
class Simulation {
  using Cipher = typename Scheme::cipher_type;
  using Message = protocol::ProtocolMessage<Cipher>;
  using Decryptor = typename he::DecryptorFor<Scheme>::type;

  enum class EventKind { deliver, guest_wait };
  struct Event {
    EventKind kind = EventKind::deliver;
    PartyId dst = 0;
    std::shared_ptr<const Message> msg;
    int node = -1;
    int iteration = 0;
  };

  enum class GuestPhase { forward, waiting, past_residual };

  struct Party {
    Matrix train;  // local data, or its projection when compressed
    std::optional<compression::CompressionPlan> plan;
    protocol::ModelParams theta;
    protocol::Optimizer optimizer;
    he::Rng rng;
    std::map<int, Vector> masks;
    std::map<std::size_t, Matrix> batches;
    SimTime busy{};
    int last_node = -1;
    int done = 0;       // newest iteration whose update has been applied
    int forwarded = 0;  // newest iteration this party has sent a forward share for
  };

 public:
  Simulation(const Scheme& scheme, const Decryptor& decryptor, const data::VerticalDataset& ds,
             EngineConfig cfg)
      : scheme_(scheme), decryptor_(decryptor), ds_(ds), cfg_(std::move(cfg)), network_(cfg_.link) {
    cfg_.validate(ds_);
    hosts_ = cfg_.protocol.hosts;
    arbiter_ = cfg_.protocol.arbiter();
    total_iterations_ = cfg_.hyper.max_iterations;
    y_ = protocol::encode_labels(ds_.y, cfg_.hyper.residual_rule);
    for (PartyId h = 1; h <= hosts_; ++h) host_ids_.push_back(h);

    const std::size_t m = ds_.rows();
    const std::size_t bs = std::min(cfg_.hyper.batch_size, m);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (bs < m) {
      std::mt19937_64 gen(netsim::splitmix64(cfg_.protocol.seed ^ 0xba7c4ULL));
      std::shuffle(perm.begin(), perm.end(), gen);
    }
    for (std::size_t b = 0; b * bs < m; ++b) {
      const std::size_t hi = std::min(m, (b + 1) * bs);
      batch_rows_.emplace_back(perm.begin() + static_cast<long>(b * bs),
                               perm.begin() + static_cast<long>(hi));
      batch_y_.push_back(select(y_, batch_rows_.back()));
    }
    caches_.resize(batch_rows_.size());

    const auto& hp = cfg_.hyper;
    for (PartyId p = 0; p <= arbiter_; ++p) {
      const std::uint64_t seed = netsim::splitmix64(cfg_.protocol.seed * 0x100000001b3ULL +
                                                    static_cast<std::uint64_t>(p));
      Party party{Matrix{}, std::nullopt, protocol::ModelParams{},
                  protocol::Optimizer(hp.optimizer, hp.learning_rate, hp.rmsprop_decay,
                                      hp.rmsprop_epsilon),
                  he::Rng(seed), {}, {}, SimTime{}, -1, 0, 0};
      if (p < arbiter_) {
        const Matrix& x = ds_.parts[static_cast<std::size_t>(p)];
        party.theta.theta.assign(x.cols(), 0.0);
        const double ratio = cfg_.ratio_for(p);
        if (ratio < 1.0) {
          compression::CompressionHook hook(x, ratio);
          party.plan = hook.plan_for_iteration(1);
          party.train = hook.compressed_data();
        } else {
          party.train = x;
        }
      }
      parties_.push_back(std::move(party));
    }
    info_.resize(static_cast<std::size_t>(total_iterations_));
    if (cfg_.record_gradients) gradients_.resize(info_.size());
    thetas_.resize(info_.size());
  }

  RunResult run() {
    info(1).start = SimTime::zero();
    for (PartyId h = 1; h <= hosts_; ++h) host_forward(h, 1, SimTime::zero(), -1);
    guest_forward(1, SimTime::zero(), -1);

    while (!queue_.empty()) {
      const SimTime now = queue_.next_time();
      while (!queue_.empty() && queue_.next_time() == now) handle(queue_.pop().payload, now);
      guest_try_residual(now);
    }
    return finish();
  }

 private:
  // -------------------------------------------------------------------------
  // bookkeeping

  IterationInfo& info(int t) { return info_.at(static_cast<std::size_t>(t - 1)); }

  std::size_t slot(int t) const {
    return static_cast<std::size_t>(t - 1) % batch_rows_.size();
  }

  static Vector select(const Vector& v, const std::vector<std::size_t>& rows) {
    Vector out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = v[rows[i]];
    return out;
  }

  const Matrix& batch(PartyId p, int t) {
    Party& party = parties_[static_cast<std::size_t>(p)];
    const std::size_t b = slot(t);
    auto it = party.batches.find(b);
    if (it == party.batches.end()) {
      it = party.batches.emplace(b, party.train.select_rows(batch_rows_[b])).first;
    }
    return it->second;
  }

  /// Parameters in the space the party trains in.
  protocol::ModelParams working_params(PartyId p) const {
    const Party& party = parties_[static_cast<std::size_t>(p)];
    if (!party.plan) return party.theta;
    return {compression::compress_params(*party.plan, party.theta.theta)};
  }

  int add_span(SimTime start, SimTime end, metrics::Phase phase, int pred) {
    spans_.push_back(Span{start, end, phase, pred});
    return static_cast<int>(spans_.size()) - 1;
  }

  /// Runs `body` as one step of party p triggered at `now` by node
  /// `trigger`. Returns the step's last span.
  template <class Body>
  int step(PartyId p, SimTime now, int trigger, int t, Body&& body, bool gradient = false) {
    Party& party = parties_[static_cast<std::size_t>(p)];
    auto& counter = he::global_op_counter();
    const he::OpCounts before = counter.snapshot();
    const auto wall0 = std::chrono::steady_clock::now();
    const double flops = body();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    const he::OpCounts ops = counter.snapshot() - before;
    info(t).ops += ops;
    if (gradient) info(t).gradient_enc_mul += ops.enc_mul;

    SimDuration enc = cfg_.cost.encryption_time(ops);
    SimDuration comp = cfg_.cost.computation_time(ops, flops, Scheme::is_encrypted);
    if (cfg_.cost.wall_clock) {
      const double modeled = netsim::to_seconds(enc + comp);
      const double share = modeled > 0 ? netsim::to_seconds(enc) / modeled : 0.0;
      enc = netsim::from_seconds(wall * share);
      comp = netsim::from_seconds(wall * (1.0 - share));
    }

    const bool queued = party.busy > now;
    const SimTime start = queued ? party.busy : now;
    int pred = queued ? party.last_node : trigger;
    SimTime at = start;
    if (enc > SimDuration::zero()) {
      pred = add_span(at, at + enc, metrics::Phase::encryption, pred);
      at += enc;
    }
    const int node = add_span(at, at + comp, metrics::Phase::computation, pred);
    party.busy = at + comp;
    party.last_node = node;
    return node;
  }

  SimTime end_of(int node) const { return spans_[static_cast<std::size_t>(node)].end; }

  void send(std::shared_ptr<const Message> msg, PartyId src, PartyId dst, int from, int t) {
    const std::size_t bytes = protocol::wire_size(scheme_, *msg);
    const SimTime at = end_of(from);
    const auto deliver = network_.send(message_name(msg->index()), bytes, src, dst, at, t);
    info(t).bytes += bytes;
    info(t).messages += 1;
    if (!deliver) return;
    const int node = add_span(at, *deliver, metrics::Phase::communication, from);
    queue_.push(*deliver, Event{EventKind::deliver, dst, std::move(msg), node, t});
  }

  // -------------------------------------------------------------------------
  // party steps

  void host_forward(PartyId h, int t, SimTime now, int trigger) {
    parties_[static_cast<std::size_t>(h)].forwarded = t;
    auto share = std::make_shared<Message>();
    const int node = step(h, now, trigger, t, [&] {
      const Matrix& xb = batch(h, t);
      const auto params = working_params(h);
      auto fwd = protocol::forward(scheme_, h, t, xb, params, rng(h));
      double flops = 2.0 * static_cast<double>(xb.rows() * xb.cols());
      if (cfg_.track_loss) {
        const Vector u = matvec(xb, params.theta);
        fwd.u_sq_enc = protocol::host_loss_term(scheme_, u, cfg_.hyper.residual_rule, rng(h));
        flops *= 2.0;
      }
      *share = std::move(fwd);
      return flops;
    });
    send(std::move(share), h, protocol::kGuest, node, t);
  }

  void guest_forward(int t, SimTime now, int trigger) {
    guest_iteration_ = t;
    guest_phase_ = GuestPhase::forward;
    const int node = step(protocol::kGuest, now, trigger, t, [&] {
      const Matrix& xb = batch(protocol::kGuest, t);
      guest_u_ = matvec(xb, working_params(protocol::kGuest).theta);
      return 2.0 * static_cast<double>(xb.rows() * xb.cols());
    });
    queue_.push(end_of(node), Event{EventKind::guest_wait, protocol::kGuest, nullptr, node, t});
  }

  void guest_begin_wait(int t, int node) {
    guest_phase_ = GuestPhase::waiting;
    collector_.emplace(t, host_ids_, cfg_.protocol.backup_workers, cfg_.max_staleness,
                       cfg_.backup_mode, caches_[slot(t)]);
    guest_trigger_ = node;
    std::vector<std::shared_ptr<const Message>> later;
    for (auto& msg : early_) {
      const auto& share = std::get<protocol::ForwardShare<Cipher>>(*msg);
      if (share.iteration == t) {
        collector_->receive(share);
      } else {
        later.push_back(std::move(msg));
      }
    }
    early_ = std::move(later);
  }

  void guest_on_share(std::shared_ptr<const Message> msg, int node) {
    const auto& share = std::get<protocol::ForwardShare<Cipher>>(*msg);
    const int t = share.iteration;
    if (t > guest_iteration_ || (t == guest_iteration_ && guest_phase_ == GuestPhase::forward)) {
      early_.push_back(std::move(msg));
    } else if (t == guest_iteration_ && guest_phase_ == GuestPhase::waiting) {
      collector_->receive(share);
      guest_trigger_ = node;
    } else {
      // A late share can make a stale stand-in usable for the waiting round.
      caches_[slot(t)].store(share);
      if (guest_phase_ == GuestPhase::waiting) guest_trigger_ = node;
    }
  }

  void guest_try_residual(SimTime now) {
    if (guest_phase_ != GuestPhase::waiting) return;
    const int t = guest_iteration_;
    if (!collector_->ready()) {
      const int backups = t <= 1 ? 0 : cfg_.protocol.backup_workers;
      if (collector_->fresh_count() + static_cast<std::size_t>(backups) >=
          static_cast<std::size_t>(hosts_)) {
        info(t).blocked = true;
      }
      return;
    }
    const auto round = collector_->take();
    collector_.reset();
    guest_phase_ = GuestPhase::past_residual;
    info(t).log = round.log;

    const auto& hp = cfg_.hyper;
    const auto views = round.views();
    auto residual = std::make_shared<Message>();
    std::optional<protocol::LossParts<Cipher>> loss;
    const auto params = working_params(protocol::kGuest);
    const Vector& yb = batch_y_[slot(t)];
    const int res_node = step(protocol::kGuest, now, guest_trigger_, t, [&] {
      using View = const protocol::ForwardShare<Cipher>*;
      const std::span<View const> slots(views);
      *residual = straggler::compensated_residual(scheme_, t, slots, guest_u_, yb, hp.residual_rule,
                                                  rng(protocol::kGuest));
      if (cfg_.track_loss) {
        std::vector<View> present;
        for (View v : views)
          if (v != nullptr) present.push_back(v);
        loss = protocol::encrypted_loss(scheme_, std::span<View const>(present), guest_u_, yb,
                                        hp.residual_rule, hp.lambda, params.theta,
                                        rng(protocol::kGuest));
      }
      return 3.0 * static_cast<double>(yb.size());
    });
    for (PartyId h = 1; h <= hosts_; ++h) send(residual, protocol::kGuest, h, res_node, t);

    const auto& d = std::get<protocol::ResidualShare<Cipher>>(*residual);
    auto grad = std::make_shared<Message>();
    const int grad_node = step(
        protocol::kGuest, end_of(res_node), res_node, t,
        [&] {
          auto g = make_gradient(protocol::kGuest, t, d);
          g.loss = std::move(loss);
          *grad = std::move(g);
          return 0.0;
        },
        true);
    send(std::move(grad), protocol::kGuest, arbiter_, grad_node, t);
  }

  protocol::GradientMessage<Cipher> make_gradient(PartyId p, int t,
                                                  const protocol::ResidualShare<Cipher>& d) {
    auto g = protocol::party_gradient(scheme_, p, t, d, batch(p, t), working_params(p),
                                      cfg_.hyper.lambda, rng(p));
    if (cfg_.arbiter_masking) {
      parties_[static_cast<std::size_t>(p)].masks[t] =
          protocol::mask_gradient(scheme_, g, rng(p), cfg_.mask_scale);
    }
    return g;
  }

  void host_on_residual(PartyId h, const Message& msg, SimTime now, int node) {
    const auto& d = std::get<protocol::ResidualShare<Cipher>>(msg);
    const int t = d.iteration;
    auto grad = std::make_shared<Message>();
    const int g_node = step(
        h, now, node, t,
        [&] {
          *grad = make_gradient(h, t, d);
          return 0.0;
        },
        true);
    send(std::move(grad), h, arbiter_, g_node, t);
  }

  void arbiter_on_gradient(const Message& msg, SimTime now, int node) {
    const auto& g = std::get<protocol::GradientMessage<Cipher>>(msg);
    auto out = std::make_shared<Message>();
    const int a_node = step(arbiter_, now, node, g.iteration, [&] {
      auto res = protocol::arbiter_decrypt(
          decryptor_, std::span<const protocol::GradientMessage<Cipher>>(&g, 1));
      *out = std::move(res.gradients.front());
      return 0.0;
    });
    send(std::move(out), arbiter_, g.party, a_node, g.iteration);
  }

  void party_on_decrypted(PartyId p, const Message& msg, SimTime now, int node) {
    const auto& dg = std::get<protocol::DecryptedGradient>(msg);
    const int t = dg.iteration;
    Party& party = parties_[static_cast<std::size_t>(p)];
    const int u_node = step(p, now, node, t, [&] {
      Vector g = protocol::accept_gradient(dg, p);
      if (cfg_.arbiter_masking) {
        const Vector& mask = party.masks.at(t);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] -= mask[j];
        party.masks.erase(t);
      }
      if (party.plan) g = compression::decompress_gradient(*party.plan, g);
      party.theta = party.optimizer.step(party.theta, g);
      if (cfg_.record_gradients) store(gradients_, t, p, std::move(g));
      store(thetas_, t, p, party.theta.theta);
      if (p == protocol::kGuest && dg.loss) info(t).loss = dg.loss;
      party.done = std::max(party.done, t);
      return 4.0 * static_cast<double>(party.theta.theta.size());
    });
    info(t).end = std::max(info(t).end, end_of(u_node));
    if (t >= total_iterations_) return;
    if (p == protocol::kGuest) {
      info(t + 1).start = end_of(u_node);
      guest_forward(t + 1, end_of(u_node), u_node);
    } else if (t + 1 > party.forwarded) {
      // A host the Guest left behind can see iterations out of order; it
      // applies every gradient but only ever moves forward.
      host_forward(p, t + 1, end_of(u_node), u_node);
    }
  }

  void store(std::vector<std::vector<Vector>>& table, int t, PartyId p, Vector v) {
    auto& row = table.at(static_cast<std::size_t>(t - 1));
    if (row.empty()) row.resize(static_cast<std::size_t>(hosts_) + 1);
    row[static_cast<std::size_t>(p)] = std::move(v);
  }

  void handle(Event e, SimTime now) {
    if (e.kind == EventKind::guest_wait) {
      guest_begin_wait(e.iteration, e.node);
      return;
    }
    const Message& msg = *e.msg;
    if (std::holds_alternative<protocol::ForwardShare<Cipher>>(msg)) {
      guest_on_share(std::move(e.msg), e.node);
    } else if (std::holds_alternative<protocol::ResidualShare<Cipher>>(msg)) {
      host_on_residual(e.dst, msg, now, e.node);
    } else if (std::holds_alternative<protocol::GradientMessage<Cipher>>(msg)) {
      arbiter_on_gradient(msg, now, e.node);
    } else {
      party_on_decrypted(e.dst, msg, now, e.node);
    }
  }

  he::Rng& rng(PartyId p) { return parties_[static_cast<std::size_t>(p)].rng; }

  // -------------------------------------------------------------------------
  // results

  /// Walks the critical path back from the last span and charges each span
  /// to the Guest iteration window it overlaps.
  std::vector<metrics::PhaseBreakdown> attribute(int records, SimTime& makespan) const {
    std::vector<metrics::PhaseBreakdown> out(static_cast<std::size_t>(records));
    if (spans_.empty() || records == 0) return out;
    int last = 0;
    for (int i = 1; i < static_cast<int>(spans_.size()); ++i) {
      if (spans_[static_cast<std::size_t>(i)].end >= spans_[static_cast<std::size_t>(last)].end) last = i;
    }
    makespan = spans_[static_cast<std::size_t>(last)].end;
    std::vector<SimTime> window_start;
    for (int t = 1; t <= records; ++t) window_start.push_back(*info_[static_cast<std::size_t>(t - 1)].start);
    std::optional<SimTime> cutoff;
    if (records < total_iterations_) cutoff = info_[static_cast<std::size_t>(records)].start;

    for (int n = last; n >= 0; n = spans_[static_cast<std::size_t>(n)].pred) {
      const Span& s = spans_[static_cast<std::size_t>(n)];
      for (int t = 0; t < records; ++t) {
        const SimTime lo = window_start[static_cast<std::size_t>(t)];
        std::optional<SimTime> hi;
        if (t + 1 < records) {
          hi = window_start[static_cast<std::size_t>(t + 1)];
        } else {
          hi = cutoff;
        }
        const SimTime a = std::max(s.start, lo);
        const SimTime b = hi ? std::min(s.end, *hi) : s.end;
        if (b > a) out[static_cast<std::size_t>(t)].attribute(s.phase, b - a);
      }
    }
    return out;
  }

  Vector scores_for(const std::vector<Vector>& thetas) const {
    Vector s(ds_.rows(), 0.0);
    for (std::size_t p = 0; p < thetas.size(); ++p) {
      const Party& party = parties_[p];
      const Vector w = party.plan ? compression::compress_params(*party.plan, thetas[p]) : thetas[p];
      const Vector part = matvec(party.train, w);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] += part[i];
    }
    return s;
  }

  /// Mean full-data objective: (sum of per-sample losses + lambda/2 ||theta||^2) / m.
  double objective_for(const std::vector<Vector>& thetas, const Vector& scores) const {
    double f = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (cfg_.hyper.residual_rule == protocol::ResidualRule::linear) {
        const double r = scores[i] - y_[i];
        f += 0.5 * r * r;
      } else {
        f += std::numbers::ln2 - 0.5 * y_[i] * scores[i] + 0.125 * scores[i] * scores[i];
      }
    }
    double sq = 0.0;
    for (const auto& th : thetas) sq += squared_norm(th);
    return (f + 0.5 * cfg_.hyper.lambda * sq) / static_cast<double>(scores.size());
  }

  bool labels_mixed() const {
    const auto pos = std::count_if(ds_.y.begin(), ds_.y.end(), [](double v) { return v > 0; });
    return pos > 0 && static_cast<std::size_t>(pos) < ds_.y.size();
  }

  RunResult finish() {
    RunResult result;
    auto& m = result.metrics;
    m.label = cfg_.label;
    int records = total_iterations_;
    for (PartyId p = 0; p <= hosts_; ++p) records = std::min(records, parties_[static_cast<std::size_t>(p)].done);
    m.completed = records == total_iterations_;
    if (!m.completed) {
      std::string who;
      if (guest_phase_ == GuestPhase::waiting && collector_) {
        for (PartyId h : collector_->blocking_hosts()) who += (who.empty() ? "" : ", ") + std::to_string(h);
        m.warnings.push_back("stalled at iteration " + std::to_string(guest_iteration_) +
                             ": guest waiting on host(s) " + who);
      } else {
        for (PartyId p = 0; p <= hosts_; ++p) {
          if (parties_[static_cast<std::size_t>(p)].done < total_iterations_) {
            who += (who.empty() ? "" : ", ") + std::to_string(p);
          }
        }
        m.warnings.push_back("stalled after iteration " + std::to_string(records) +
                             ": unfinished parties " + who);
      }
    }

    const auto phases = attribute(records, result.makespan);
    const bool auc_ok = cfg_.evaluate_auc && labels_mixed();
    for (int t = 1; t <= records; ++t) {
      const auto& in = info_[static_cast<std::size_t>(t - 1)];
      metrics::IterationRecord r;
      r.iteration = t;
      r.phases = phases[static_cast<std::size_t>(t - 1)];
      r.phases.other = netsim::from_seconds(cfg_.other_per_iteration_s);
      r.start = *in.start;
      r.end = in.end;
      r.loss = in.loss;
      const auto& th = thetas_[static_cast<std::size_t>(t - 1)];
      const Vector s = scores_for(th);
      r.objective = objective_for(th, s);
      if (auc_ok) r.auc = protocol::auc(s, ds_.y);
      r.ops = in.ops;
      r.gradient_enc_mul = in.gradient_enc_mul;
      r.arrival_order = in.log.arrival_order;
      r.compensated = in.log.compensated;
      r.staleness = in.log.compensated_ages;
      r.blocked_on_staleness = in.blocked;
      r.bytes = in.bytes;
      r.messages = in.messages;
      m.iterations.push_back(std::move(r));
    }

    for (PartyId p = 0; p <= hosts_; ++p) {
      const Party& party = parties_[static_cast<std::size_t>(p)];
      result.final_params.push_back(party.theta);
      result.plans.push_back(party.plan);
    }
    thetas_.resize(static_cast<std::size_t>(records));
    result.thetas = std::move(thetas_);
    if (cfg_.record_gradients) {
      gradients_.resize(static_cast<std::size_t>(records));
      result.gradients = std::move(gradients_);
    }
    result.trace = network_.trace();
    return result;
  }

  const Scheme& scheme_;
  const Decryptor& decryptor_;
  const data::VerticalDataset& ds_;
  EngineConfig cfg_;
  netsim::Network network_;

  int hosts_ = 0;
  PartyId arbiter_ = 0;
  int total_iterations_ = 0;
  std::vector<PartyId> host_ids_;
  Vector y_;
  std::vector<std::vector<std::size_t>> batch_rows_;
  std::vector<Vector> batch_y_;

  std::vector<Party> parties_;
  std::vector<Span> spans_;
  netsim::EventQueue<Event> queue_;
  std::vector<IterationInfo> info_;
  std::vector<std::vector<Vector>> thetas_;
  std::vector<std::vector<Vector>> gradients_;

  // Guest round state. The stale cache is kept per batch slot so that a
  // stand-in share always covers the same rows as the round it fills.
  std::vector<straggler::BackupCache<Cipher>> caches_;
  std::optional<straggler::RoundCollector<Cipher>> collector_;
  std::vector<std::shared_ptr<const Message>> early_;
  GuestPhase guest_phase_ = GuestPhase::forward;
  int guest_iteration_ = 1;
  int guest_trigger_ = -1;
  Vector guest_u_;
};

}  // namespace detail

/// Trains one model and returns its metrics. The decryptor is used only by
/// the Arbiter's steps.
template <he::HomomorphicScheme Scheme>
RunResult run_training(const Scheme& scheme, const typename he::DecryptorFor<Scheme>::type& decryptor,
                       const data::VerticalDataset& ds, EngineConfig cfg) {
  detail::Simulation<Scheme> sim(scheme, decryptor, ds, std::move(cfg));
  return sim.run();
}

}  // namespace vflsim::engine
