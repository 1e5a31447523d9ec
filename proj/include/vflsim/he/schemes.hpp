#pragma once

// Scheme adapters consumed by the protocol templates. PaillierScheme does
// real encryption; PlainScheme is the "plain mode" baseline that moves raw
// doubles around with the same message flow and no encryption.

#include <bit>
#include <concepts>
#include <cstdint>
#include <vector>

#include "vflsim/he/paillier.hpp"

namespace vflsim::he {

template <class S>
concept HomomorphicScheme = requires(const S s, typename S::cipher_type c, double x, Rng& rng,
                                     std::vector<std::uint8_t>& out) {
  typename S::cipher_type;
  { s.encrypt(x, rng) } -> std::same_as<typename S::cipher_type>;
  { s.add(c, c) } -> std::same_as<typename S::cipher_type>;
  { s.scalar_mul(c, x) } -> std::same_as<typename S::cipher_type>;
  { s.cipher_bytes() } -> std::convertible_to<std::size_t>;
  { s.serialize_into(c, out) };
  { S::is_encrypted } -> std::convertible_to<bool>;
};

class PaillierScheme {
 public:
  using cipher_type = Ciphertext;
  static constexpr bool is_encrypted = true;

  explicit PaillierScheme(PublicKey pk) : pk_(std::move(pk)) {}

  Ciphertext encrypt(double x, Rng& rng) const { return he::encrypt(pk_, x, rng); }
  Ciphertext add(const Ciphertext& a, const Ciphertext& b) const { return he::add(pk_, a, b); }
  Ciphertext scalar_mul(const Ciphertext& c, double s) const { return he::scalar_mul(pk_, c, s); }
  std::size_t cipher_bytes() const { return pk_.ciphertext_bytes(); }
  void serialize_into(const Ciphertext& c, std::vector<std::uint8_t>& out) const {
    he::serialize_into(pk_, c, out);
  }
  const PublicKey& public_key() const { return pk_; }

 private:
  PublicKey pk_;
};

class PaillierDecryptor {
 public:
  explicit PaillierDecryptor(PrivateKey sk) : sk_(std::move(sk)) {}
  double decrypt(const Ciphertext& c) const { return he::decrypt(sk_, c); }

 private:
  PrivateKey sk_;
};

struct PlainCipher {
  double value = 0.0;
  friend bool operator==(const PlainCipher&, const PlainCipher&) = default;
};

/// Counts enc_mul/enc_add like the real scheme but never counts an
/// encryption, so plain-mode runs report zero encryption time.
class PlainScheme {
 public:
  using cipher_type = PlainCipher;
  static constexpr bool is_encrypted = false;
  static constexpr std::size_t kValueBytes = 8;

  PlainCipher encrypt(double x, Rng&) const { return {x}; }
  PlainCipher add(const PlainCipher& a, const PlainCipher& b) const {
    global_op_counter().count_add();
    return {a.value + b.value};
  }
  PlainCipher scalar_mul(const PlainCipher& c, double s) const {
    global_op_counter().count_mul();
    return {c.value * s};
  }
  std::size_t cipher_bytes() const { return kValueBytes; }
  void serialize_into(const PlainCipher& c, std::vector<std::uint8_t>& out) const {
    const auto bits = std::bit_cast<std::uint64_t>(c.value);
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
};

class PlainDecryptor {
 public:
  double decrypt(const PlainCipher& c) const { return c.value; }
};

static_assert(HomomorphicScheme<PaillierScheme>);
static_assert(HomomorphicScheme<PlainScheme>);

template <class S>
struct DecryptorFor;
template <>
struct DecryptorFor<PaillierScheme> {
  using type = PaillierDecryptor;
};
template <>
struct DecryptorFor<PlainScheme> {
  using type = PlainDecryptor;
};

}  // namespace vflsim::he
