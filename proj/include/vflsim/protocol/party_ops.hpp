#pragma once

// One training round, split into the steps each party performs. Hosts and
// the Guest only ever see a Scheme (public key); decryption happens in
// arbiter_decrypt, which is the only step handed a decryptor.
//
// Per sample i, with u^k the forward value of host k and u^B the Guest's:
//   linear:           d_i = sum_k u_i^k + (u_i^B - y_i)
//   logistic_taylor:  d_i = 0.25 * (sum_k u_i^k + u_i^B) - 0.5 * y_i,  y in {-1,+1}
// Gradient of party p: X_p^T d + lambda * theta_p.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "vflsim/error.hpp"
#include "vflsim/he/schemes.hpp"
#include "vflsim/linalg/cipher_vector.hpp"
#include "vflsim/protocol/messages.hpp"

namespace vflsim::protocol {

/// Encrypts u_i = theta . x_i for each batch row plus ||theta||^2.
/// m + 1 encryptions.
template <he::HomomorphicScheme Scheme>
ForwardShare<typename Scheme::cipher_type> forward(const Scheme& scheme, PartyId party,
                                                   int iteration, const Matrix& batch,
                                                   const ModelParams& params, he::Rng& rng) {
  vflsim::detail::require_shape(batch.cols() == params.theta.size(),
                        "forward: batch columns != parameter count");
  const Vector u = matvec(batch, params.theta);
  ForwardShare<typename Scheme::cipher_type> share;
  share.party = party;
  share.iteration = iteration;
  share.u_enc = linalg::encrypt_vector(scheme, u, rng);
  share.theta_sq_enc = scheme.encrypt(squared_norm(params.theta), rng);
  return share;
}

/// Coefficient of the squared forward value in the per-sample loss.
inline double square_coefficient(ResidualRule rule) {
  return rule == ResidualRule::linear ? 1.0 : 0.125;
}

/// Host-side loss term: encrypted c * sum_i u_i^2. Host-host cross products
/// are not computable under additive encryption, so the tracked loss with
/// K > 1 hosts omits them.
template <he::HomomorphicScheme Scheme>
typename Scheme::cipher_type host_loss_term(const Scheme& scheme, std::span<const double> u,
                                            ResidualRule rule, he::Rng& rng) {
  return scheme.encrypt(square_coefficient(rule) * squared_norm(u), rng);
}

namespace detail {

template <class Cipher>
void check_shares(std::span<const ForwardShare<Cipher>* const> shares, std::size_t samples) {
  for (const auto* s : shares) {
    if (s == nullptr) throw ProtocolError("residual: missing forward share");
    vflsim::detail::require_shape(s->u_enc.size() == samples, "residual: share length != batch size");
  }
}

inline void check_labels(std::span<const double> y, ResidualRule rule) {
  if (rule != ResidualRule::logistic_taylor) return;
  for (double v : y) {
    if (v != 1.0 && v != -1.0) {
      throw ConfigError("logistic_taylor residual needs labels in {-1,+1}");
    }
  }
}

/// Per-sample encrypted sum of the given host shares. Empty when no shares.
template <he::HomomorphicScheme Scheme>
linalg::CipherVector<Scheme> sum_host_shares(
    const Scheme& scheme, std::span<const ForwardShare<typename Scheme::cipher_type>* const> shares) {
  if (shares.empty()) return {};
  linalg::CipherVector<Scheme> acc = shares[0]->u_enc;
  for (std::size_t k = 1; k < shares.size(); ++k) {
    acc = linalg::cv_add<Scheme>(scheme, acc, shares[k]->u_enc);
  }
  return acc;
}

}  // namespace detail

/// Guest-side residual from whatever host shares it was handed (all fresh,
/// a fresh/stale mix, or a partial set in drop mode).
template <he::HomomorphicScheme Scheme>
ResidualShare<typename Scheme::cipher_type> guest_residual(
    const Scheme& scheme, int iteration,
    std::span<const ForwardShare<typename Scheme::cipher_type>* const> host_shares,
    std::span<const double> guest_u, std::span<const double> y, ResidualRule rule, he::Rng& rng) {
  vflsim::detail::require_shape(guest_u.size() == y.size(), "residual: guest_u and labels differ");
  detail::check_shares(host_shares, y.size());
  detail::check_labels(y, rule);

  // Guest folds its plaintext part into one encryption per sample.
  Vector own(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    own[i] = rule == ResidualRule::linear ? guest_u[i] - y[i] : 0.25 * guest_u[i] - 0.5 * y[i];
  }
  auto own_enc = linalg::encrypt_vector(scheme, own, rng);

  ResidualShare<typename Scheme::cipher_type> out;
  out.iteration = iteration;
  auto hosts = detail::sum_host_shares(scheme, host_shares);
  if (hosts.empty()) {
    out.d_enc = std::move(own_enc);
    return out;
  }
  if (rule == ResidualRule::logistic_taylor) {
    for (auto& c : hosts) c = scheme.scalar_mul(c, 0.25);
  }
  out.d_enc = linalg::cv_add<Scheme>(scheme, hosts, own_enc);
  return out;
}

/// Encrypted loss pieces; total = l_a + l_b + l_ab.
///   linear:   l_b = sum (u^B - y)^2,  l_ab = sum_i (sum_k [[u_i^k]]) * 2 (u_i^B - y_i)
///   logistic: l_b = sum log2 - y u^B / 2 + (u^B)^2 / 8,
///             l_ab = sum_i (sum_k [[u_i^k]]) * (u_i^B / 4 - y_i / 2)
/// l_a = sum_k host_loss_term_k + lambda/2 sum_k ||theta_k||^2, and l_b also
/// carries lambda/2 ||theta_B||^2.
template <he::HomomorphicScheme Scheme>
LossParts<typename Scheme::cipher_type> encrypted_loss(
    const Scheme& scheme,
    std::span<const ForwardShare<typename Scheme::cipher_type>* const> host_shares,
    std::span<const double> guest_u, std::span<const double> y, ResidualRule rule,
    double lambda, std::span<const double> guest_theta, he::Rng& rng) {
  vflsim::detail::require_shape(guest_u.size() == y.size(), "loss: guest_u and labels differ");
  detail::check_shares(host_shares, y.size());
  detail::check_labels(y, rule);

  double l_b = 0.5 * lambda * squared_norm(guest_theta);
  Vector cross(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (rule == ResidualRule::linear) {
      const double r = guest_u[i] - y[i];
      l_b += r * r;
      cross[i] = 2.0 * r;
    } else {
      l_b += std::numbers::ln2 - 0.5 * y[i] * guest_u[i] + 0.125 * guest_u[i] * guest_u[i];
      cross[i] = 0.25 * guest_u[i] - 0.5 * y[i];
    }
  }

  LossParts<typename Scheme::cipher_type> parts;
  parts.l_b = scheme.encrypt(l_b, rng);
  if (host_shares.empty()) {
    parts.l_a = scheme.encrypt(0.0, rng);
    parts.l_ab = scheme.encrypt(0.0, rng);
  } else {
    const auto* first = host_shares[0];
    if (!first->u_sq_enc) throw ProtocolError("loss: host share carries no loss term");
    parts.l_a = scheme.add(*first->u_sq_enc, scheme.scalar_mul(first->theta_sq_enc, 0.5 * lambda));
    for (std::size_t k = 1; k < host_shares.size(); ++k) {
      const auto* s = host_shares[k];
      if (!s->u_sq_enc) throw ProtocolError("loss: host share carries no loss term");
      parts.l_a = scheme.add(parts.l_a, *s->u_sq_enc);
      parts.l_a = scheme.add(parts.l_a, scheme.scalar_mul(s->theta_sq_enc, 0.5 * lambda));
    }
    const auto sums = detail::sum_host_shares(scheme, host_shares);
    parts.l_ab = linalg::cv_dot_plain(scheme, std::span<const typename Scheme::cipher_type>(sums),
                                      std::span<const double>(cross));
  }
  parts.total = scheme.add(scheme.add(parts.l_a, parts.l_b), parts.l_ab);
  return parts;
}

/// [[X^T d + lambda theta]]: the matvec costs rows * cols enc_mul, the
/// regularizer cols encryptions and cols enc_add.
template <he::HomomorphicScheme Scheme>
GradientMessage<typename Scheme::cipher_type> party_gradient(
    const Scheme& scheme, PartyId party, int iteration,
    const ResidualShare<typename Scheme::cipher_type>& residual, const Matrix& x_local,
    const ModelParams& params, double lambda, he::Rng& rng) {
  vflsim::detail::require_shape(x_local.cols() == params.theta.size(),
                        "party_gradient: local columns != parameter count");
  vflsim::detail::require_shape(residual.d_enc.size() == x_local.rows(),
                        "party_gradient: residual length != batch rows");
  auto product = linalg::encrypted_gradient_matvec(
      scheme, std::span<const typename Scheme::cipher_type>(residual.d_enc), x_local);
  Vector reg(params.theta.size());
  for (std::size_t j = 0; j < reg.size(); ++j) reg[j] = lambda * params.theta[j];
  const auto reg_enc = linalg::encrypt_vector(scheme, reg, rng);
  GradientMessage<typename Scheme::cipher_type> msg;
  msg.party = party;
  msg.iteration = iteration;
  msg.g_enc = linalg::cv_add<Scheme>(scheme, product, reg_enc);
  return msg;
}

/// Adds an encrypted random mask so the Arbiter sees g + r instead of g.
template <he::HomomorphicScheme Scheme>
Vector mask_gradient(const Scheme& scheme, GradientMessage<typename Scheme::cipher_type>& msg,
                     he::Rng& rng, double scale = 1.0) {
  Vector mask(msg.g_enc.size());
  for (auto& r : mask) r = scale * (2.0 * rng.uniform() - 1.0);
  const auto mask_enc = linalg::encrypt_vector(scheme, mask, rng);
  msg.g_enc = linalg::cv_add<Scheme>(scheme, msg.g_enc, mask_enc);
  return mask;
}

struct ArbiterOutput {
  std::vector<DecryptedGradient> gradients;
  std::optional<double> loss;
};

/// Decrypts each party's gradient separately, plus the total loss when one
/// is attached. Decryptions: sum of gradient lengths, + 1 for the loss.
template <class Decryptor, class Cipher>
ArbiterOutput arbiter_decrypt(const Decryptor& decryptor,
                              std::span<const GradientMessage<Cipher>> messages) {
  ArbiterOutput out;
  for (const auto& m : messages) {
    DecryptedGradient g;
    g.party = m.party;
    g.iteration = m.iteration;
    g.gradient = linalg::decrypt_vector(decryptor, std::span<const Cipher>(m.g_enc));
    if (m.loss) {
      const double loss = decryptor.decrypt(m.loss->total);
      g.loss = loss;
      out.loss = loss;
    }
    out.gradients.push_back(std::move(g));
  }
  return out;
}

/// A party may only accept its own decrypted gradient.
inline const Vector& accept_gradient(const DecryptedGradient& g, PartyId recipient) {
  if (g.party != recipient) {
    throw ProtocolError("gradient for party " + std::to_string(g.party) + " routed to party " +
                        std::to_string(recipient));
  }
  return g.gradient;
}

/// theta - mu * g.
inline ModelParams apply_update(const ModelParams& params, std::span<const double> gradient,
                                double learning_rate) {
  vflsim::detail::require_shape(gradient.size() == params.theta.size(),
                        "apply_update: gradient length != parameter count");
  ModelParams next = params;
  for (std::size_t j = 0; j < gradient.size(); ++j) {
    if (!std::isfinite(gradient[j])) throw Error("apply_update: non-finite gradient");
    next.theta[j] -= learning_rate * gradient[j];
  }
  return next;
}

/// Plaintext-side update rule applied after decryption.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double decay = 0.9, double epsilon = 1e-8)
      : kind_(kind), learning_rate_(learning_rate), decay_(decay), epsilon_(epsilon) {}

  ModelParams step(const ModelParams& params, std::span<const double> gradient) {
    if (kind_ == OptimizerKind::sgd) return apply_update(params, gradient, learning_rate_);
    vflsim::detail::require_shape(gradient.size() == params.theta.size(),
                          "rmsprop: gradient length != parameter count");
    if (mean_square_.empty()) mean_square_.assign(gradient.size(), 0.0);
    Vector scaled(gradient.size());
    for (std::size_t j = 0; j < gradient.size(); ++j) {
      if (!std::isfinite(gradient[j])) throw Error("rmsprop: non-finite gradient");
      mean_square_[j] = decay_ * mean_square_[j] + (1.0 - decay_) * gradient[j] * gradient[j];
      scaled[j] = gradient[j] / (std::sqrt(mean_square_[j]) + epsilon_);
    }
    return apply_update(params, scaled, learning_rate_);
  }

 private:
  OptimizerKind kind_;
  double learning_rate_;
  double decay_;
  double epsilon_;
  Vector mean_square_;
};

}  // namespace vflsim::protocol
