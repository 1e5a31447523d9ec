#pragma once

// Protocol messages and their wire encoding. Message sizes used by the
// network simulator are the lengths of these encodings.
//
// Header (13 bytes): type u8, party i32, iteration i32, element count u32,
// all big-endian. Ciphertext elements follow in the scheme's fixed-width
// encoding; plaintext gradients as big-endian IEEE-754 doubles.

#include <bit>
#include <concepts>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "vflsim/he/schemes.hpp"
#include "vflsim/protocol/types.hpp"

namespace vflsim::protocol {

enum class MessageType : std::uint8_t {
  forward_share = 1,
  residual_share = 2,
  gradient = 3,
  decrypted_gradient = 4,
};

inline constexpr std::size_t kHeaderBytes = 13;

template <class Cipher>
struct ForwardShare {
  PartyId party = 0;
  int iteration = 0;
  std::vector<Cipher> u_enc;
  Cipher theta_sq_enc{};
  /// Encrypted sum of squared forward values; present only when the run
  /// tracks loss.
  std::optional<Cipher> u_sq_enc;
};

template <class Cipher>
struct ResidualShare {
  int iteration = 0;
  std::vector<Cipher> d_enc;
};

template <class Cipher>
struct LossParts {
  Cipher l_a{};
  Cipher l_b{};
  Cipher l_ab{};
  Cipher total{};
};

template <class Cipher>
struct GradientMessage {
  PartyId party = 0;
  int iteration = 0;
  std::vector<Cipher> g_enc;
  /// Attached by the Guest when loss is tracked.
  std::optional<LossParts<Cipher>> loss;
};

struct DecryptedGradient {
  PartyId party = 0;
  int iteration = 0;
  Vector gradient;
  std::optional<double> loss;
};

template <class Cipher>
using ProtocolMessage = std::variant<ForwardShare<Cipher>, ResidualShare<Cipher>,
                                     GradientMessage<Cipher>, DecryptedGradient>;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_header(std::vector<std::uint8_t>& out, MessageType type, PartyId party,
                       int iteration, std::size_t count) {
  out.push_back(static_cast<std::uint8_t>(type));
  put_u32(out, static_cast<std::uint32_t>(party));
  put_u32(out, static_cast<std::uint32_t>(iteration));
  put_u32(out, static_cast<std::uint32_t>(count));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

}  // namespace detail

template <he::HomomorphicScheme Scheme>
void wire_encode(const Scheme& s, const ForwardShare<typename Scheme::cipher_type>& m,
                 std::vector<std::uint8_t>& out) {
  detail::put_header(out, MessageType::forward_share, m.party, m.iteration, m.u_enc.size());
  for (const auto& c : m.u_enc) s.serialize_into(c, out);
  s.serialize_into(m.theta_sq_enc, out);
  out.push_back(m.u_sq_enc ? 1 : 0);
  if (m.u_sq_enc) s.serialize_into(*m.u_sq_enc, out);
}

template <he::HomomorphicScheme Scheme>
void wire_encode(const Scheme& s, const ResidualShare<typename Scheme::cipher_type>& m,
                 std::vector<std::uint8_t>& out) {
  detail::put_header(out, MessageType::residual_share, kGuest, m.iteration, m.d_enc.size());
  for (const auto& c : m.d_enc) s.serialize_into(c, out);
}

template <he::HomomorphicScheme Scheme>
void wire_encode(const Scheme& s, const GradientMessage<typename Scheme::cipher_type>& m,
                 std::vector<std::uint8_t>& out) {
  detail::put_header(out, MessageType::gradient, m.party, m.iteration, m.g_enc.size());
  for (const auto& c : m.g_enc) s.serialize_into(c, out);
  out.push_back(m.loss ? 1 : 0);
  if (m.loss) {
    s.serialize_into(m.loss->l_a, out);
    s.serialize_into(m.loss->l_b, out);
    s.serialize_into(m.loss->l_ab, out);
    s.serialize_into(m.loss->total, out);
  }
}

template <he::HomomorphicScheme Scheme>
void wire_encode(const Scheme&, const DecryptedGradient& m, std::vector<std::uint8_t>& out) {
  detail::put_header(out, MessageType::decrypted_gradient, m.party, m.iteration,
                     m.gradient.size());
  for (double v : m.gradient) detail::put_f64(out, v);
  out.push_back(m.loss ? 1 : 0);
  if (m.loss) detail::put_f64(out, *m.loss);
}

/// Anything that may travel between parties. Key material has no encoding,
/// so putting a PrivateKey into a message does not compile.
template <class T, class Scheme>
concept WireMessage = requires(const Scheme& s, const T& m, std::vector<std::uint8_t>& out) {
  wire_encode(s, m, out);
};

template <he::HomomorphicScheme Scheme>
std::vector<std::uint8_t> encode_message(const Scheme& s,
                                         const ProtocolMessage<typename Scheme::cipher_type>& m) {
  std::vector<std::uint8_t> out;
  std::visit([&](const auto& inner) { wire_encode(s, inner, out); }, m);
  return out;
}

/// Closed-form size of encode_message(s, m), without serializing anything.
template <he::HomomorphicScheme Scheme>
std::size_t wire_size(const Scheme& s, const ProtocolMessage<typename Scheme::cipher_type>& m) {
  const std::size_t c = s.cipher_bytes();
  return std::visit(
      [&](const auto& inner) -> std::size_t {
        using T = std::decay_t<decltype(inner)>;
        if constexpr (std::is_same_v<T, ForwardShare<typename Scheme::cipher_type>>) {
          return kHeaderBytes + (inner.u_enc.size() + 1) * c + 1 + (inner.u_sq_enc ? c : 0);
        } else if constexpr (std::is_same_v<T, ResidualShare<typename Scheme::cipher_type>>) {
          return kHeaderBytes + inner.d_enc.size() * c;
        } else if constexpr (std::is_same_v<T, GradientMessage<typename Scheme::cipher_type>>) {
          return kHeaderBytes + inner.g_enc.size() * c + 1 + (inner.loss ? 4 * c : 0);
        } else {
          return kHeaderBytes + inner.gradient.size() * 8 + 1 + (inner.loss ? 8 : 0);
        }
      },
      m);
}

}  // namespace vflsim::protocol
