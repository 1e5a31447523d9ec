#pragma once

// Paillier cryptosystem (g = n + 1 variant) with base-16 fixed-point
// encoding of reals.
//
// Plaintext space layout for a modulus n, with max_int = n/3 - 1:
//   [0, max_int]              non-negative values
//   (max_int, n - max_int)    forbidden band, decodes as overflow
//   [n - max_int, n)          negative values, stored as n - |v|

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vflsim/error.hpp"
#include "vflsim/he/op_counter.hpp"

namespace vflsim::he {

inline constexpr int kLog2EncodingBase = 4;  // base 16
inline constexpr int kDoublePrecisionBits = 53;
inline constexpr unsigned kMinKeyBits = 512;
inline constexpr unsigned kMinTestKeyBits = 128;
inline constexpr std::size_t kExponentBytes = 4;

/// Small keys are accepted only when VFLSIM_TEST_MODE is set to a non-zero value.
inline bool test_mode_enabled() {
  const char* v = std::getenv("VFLSIM_TEST_MODE");
  return v != nullptr && *v != '\0' && std::string_view(v) != "0";
}

/// Seeded randomness source for key generation and encryption blinding.
/// Deterministic given its seed; not shared between parties.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(std::make_unique<gmp_randclass>(gmp_randinit_mt)) {
    state_->seed(mpz_class(std::to_string(seed)));
  }

  mpz_class bits(mp_bitcnt_t n) { return state_->get_z_bits(n); }
  /// Uniform in [0, bound).
  mpz_class below(const mpz_class& bound) { return state_->get_z_range(bound); }
  std::uint64_t next_u64() { return bits(64).get_ui(); }
  /// Uniform in [0, 1).
  double uniform() { return std::ldexp(static_cast<double>(bits(53).get_ui()), -53); }

 private:
  std::unique_ptr<gmp_randclass> state_;
};

class PublicKey {
 public:
  PublicKey() = default;
  explicit PublicKey(mpz_class n)
      : n_(std::move(n)),
        n_squared_(n_ * n_),
        g_(n_ + 1),
        max_int_(n_ / 3 - 1),
        key_bits_(static_cast<unsigned>(mpz_sizeinbase(n_.get_mpz_t(), 2))) {}

  const mpz_class& n() const { return n_; }
  const mpz_class& n_squared() const { return n_squared_; }
  const mpz_class& g() const { return g_; }
  const mpz_class& max_int() const { return max_int_; }
  unsigned key_bits() const { return key_bits_; }
  /// Width of a serialized ciphertext value, excluding the exponent field.
  std::size_t ciphertext_value_bytes() const { return (2 * std::size_t{key_bits_} + 7) / 8; }
  std::size_t ciphertext_bytes() const { return ciphertext_value_bytes() + kExponentBytes; }

  friend bool operator==(const PublicKey& a, const PublicKey& b) { return a.n_ == b.n_; }

 private:
  mpz_class n_;
  mpz_class n_squared_;
  mpz_class g_;
  mpz_class max_int_;
  unsigned key_bits_ = 0;
};

struct KeyPair;
class PrivateKey;
struct UnsafePrivateKeyAccess;
KeyPair keygen(unsigned key_bits, std::uint64_t seed);

/// Only keygen and the explicitly unsafe import path can build one.
class PrivateKey {
 public:
  const PublicKey& public_key() const { return public_key_; }
  const mpz_class& lambda() const { return lambda_; }
  const mpz_class& mu() const { return mu_; }

  PrivateKey(const PrivateKey&) = default;
  PrivateKey(PrivateKey&&) noexcept = default;
  PrivateKey& operator=(const PrivateKey&) = default;
  PrivateKey& operator=(PrivateKey&&) noexcept = default;

 private:
  friend struct UnsafePrivateKeyAccess;
  friend KeyPair keygen(unsigned, std::uint64_t);

  PrivateKey(const mpz_class& p, const mpz_class& q) : public_key_(p * q), p_(p), q_(q) {
    mpz_class pm1 = p - 1;
    mpz_class qm1 = q - 1;
    mpz_lcm(lambda_.get_mpz_t(), pm1.get_mpz_t(), qm1.get_mpz_t());
    if (mpz_invert(mu_.get_mpz_t(), lambda_.get_mpz_t(), public_key_.n().get_mpz_t()) == 0) {
      throw Error("paillier: lambda not invertible modulo n");
    }
  }

  PublicKey public_key_;
  mpz_class p_;
  mpz_class q_;
  mpz_class lambda_;
  mpz_class mu_;
};

struct KeyPair {
  PublicKey public_key;
  PrivateKey private_key;
};

/// Gate for the private-key export/import path.
struct UnsafePrivateKeyAccess {
  static std::pair<mpz_class, mpz_class> primes(const PrivateKey& sk) { return {sk.p_, sk.q_}; }
  static PrivateKey from_primes(const mpz_class& p, const mpz_class& q) { return {p, q}; }
};

namespace detail {

inline mpz_class random_prime(Rng& rng, unsigned bits) {
  mpz_class candidate = rng.bits(bits);
  // Top two bits set, so the product of two such primes has exactly 2*bits bits.
  mpz_setbit(candidate.get_mpz_t(), bits - 1);
  mpz_setbit(candidate.get_mpz_t(), bits - 2);
  mpz_class prime;
  mpz_nextprime(prime.get_mpz_t(), candidate.get_mpz_t());
  return prime;
}

inline int floor_div(int a, int b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }

}  // namespace detail

/// Deterministic in (key_bits, seed).
inline KeyPair keygen(unsigned key_bits, std::uint64_t seed) {
  const unsigned minimum = test_mode_enabled() ? kMinTestKeyBits : kMinKeyBits;
  if (key_bits < minimum || key_bits % 2 != 0) {
    throw ConfigError("keygen: key_bits must be even and >= " + std::to_string(minimum) +
                      ", got " + std::to_string(key_bits));
  }
  Rng rng(seed);
  const unsigned half = key_bits / 2;
  for (;;) {
    mpz_class p = detail::random_prime(rng, half);
    mpz_class q = detail::random_prime(rng, half);
    if (p == q) continue;
    mpz_class n = p * q;
    if (mpz_sizeinbase(n.get_mpz_t(), 2) != key_bits) continue;
    mpz_class phi = (p - 1) * (q - 1);
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
    if (g != 1) continue;
    PrivateKey sk(p, q);
    PublicKey pk = sk.public_key();
    return KeyPair{std::move(pk), std::move(sk)};
  }
}

// ---------------------------------------------------------------------------
// Fixed-point encoding

/// value = signed(mantissa) * 16^exponent, mantissa reduced modulo n.
struct EncodedNumber {
  mpz_class mantissa;
  std::int32_t exponent = 0;
};

/// Signed integer representation of x scaled by 16^-exponent, keeping
/// `precision_bits` significant bits.
struct FixedPoint {
  mpz_class value;
  std::int32_t exponent = 0;
};

inline FixedPoint to_fixed_point(double x, int precision_bits = kDoublePrecisionBits) {
  if (!std::isfinite(x)) throw OverflowError("encode: non-finite value");
  if (x == 0.0) {
    return {mpz_class(0), static_cast<std::int32_t>(
                              detail::floor_div(-precision_bits, kLog2EncodingBase))};
  }
  int binary_exponent = 0;
  const double fraction = std::frexp(x, &binary_exponent);  // x = fraction * 2^binary_exponent
  const int exponent = detail::floor_div(binary_exponent - precision_bits, kLog2EncodingBase);
  // x = significand * 2^(binary_exponent - 53), significand exact in int64.
  const auto significand = static_cast<std::int64_t>(std::ldexp(fraction, kDoublePrecisionBits));
  const int shift = binary_exponent - kDoublePrecisionBits - kLog2EncodingBase * exponent;
  mpz_class value(static_cast<long>(significand));
  if (shift >= 0) {
    value <<= shift;
  } else {
    value = mpz_class(static_cast<long>(std::nearbyint(std::ldexp(x, -kLog2EncodingBase * exponent))));
  }
  return {std::move(value), static_cast<std::int32_t>(exponent)};
}

/// Scalar encoding with trailing base-16 zeros stripped: keeps the
/// exponentiation in scalar_mul as short as the value allows.
inline FixedPoint to_fixed_point_normalized(double x) {
  FixedPoint fp = to_fixed_point(x);
  if (fp.value == 0) return {mpz_class(0), 0};
  while (mpz_divisible_2exp_p(fp.value.get_mpz_t(), kLog2EncodingBase) != 0) {
    fp.value >>= kLog2EncodingBase;
    ++fp.exponent;
  }
  return fp;
}

inline EncodedNumber encode(const PublicKey& pk, const FixedPoint& fp) {
  if (abs(fp.value) > pk.max_int()) throw OverflowError("encode: value exceeds max_int");
  mpz_class m = fp.value;
  if (m < 0) m += pk.n();
  return {std::move(m), fp.exponent};
}

inline EncodedNumber encode(const PublicKey& pk, double x,
                            int precision_bits = kDoublePrecisionBits) {
  return encode(pk, to_fixed_point(x, precision_bits));
}

/// Signed mantissa; throws when it lies in the forbidden band.
inline mpz_class signed_mantissa(const PublicKey& pk, const EncodedNumber& e) {
  if (e.mantissa <= pk.max_int()) return e.mantissa;
  if (e.mantissa >= pk.n() - pk.max_int()) return e.mantissa - pk.n();
  throw OverflowError("decode: mantissa in overflow band");
}

inline double fixed_point_to_double(const mpz_class& value, std::int32_t exponent) {
  if (value == 0) return 0.0;
  long binary_exponent = 0;
  const double d = mpz_get_d_2exp(&binary_exponent, value.get_mpz_t());
  return std::ldexp(d, static_cast<int>(binary_exponent) + kLog2EncodingBase * exponent);
}

inline double decode(const PublicKey& pk, const EncodedNumber& e) {
  return fixed_point_to_double(signed_mantissa(pk, e), e.exponent);
}

// ---------------------------------------------------------------------------
// Ciphertexts

struct Ciphertext {
  mpz_class value;
  std::int32_t exponent = 0;

  friend bool operator==(const Ciphertext& a, const Ciphertext& b) {
    return a.exponent == b.exponent && a.value == b.value;
  }
};

/// Encrypts an already-encoded number: c = (1 + m*n) * r^n mod n^2.
inline Ciphertext encrypt_encoded(const PublicKey& pk, const EncodedNumber& e, Rng& rng) {
  mpz_class r;
  do {
    r = rng.below(pk.n());
  } while (r == 0);
  mpz_class blind;
  mpz_powm(blind.get_mpz_t(), r.get_mpz_t(), pk.n().get_mpz_t(), pk.n_squared().get_mpz_t());
  mpz_class c = (1 + e.mantissa * pk.n()) % pk.n_squared();
  c = (c * blind) % pk.n_squared();
  global_op_counter().count_encrypt();
  return {std::move(c), e.exponent};
}

inline Ciphertext encrypt(const PublicKey& pk, double x, Rng& rng) {
  return encrypt_encoded(pk, encode(pk, x), rng);
}

inline EncodedNumber decrypt_encoded(const PrivateKey& sk, const Ciphertext& c) {
  const PublicKey& pk = sk.public_key();
  mpz_class u;
  mpz_powm(u.get_mpz_t(), c.value.get_mpz_t(), sk.lambda().get_mpz_t(),
           pk.n_squared().get_mpz_t());
  mpz_class l = (u - 1) / pk.n();
  mpz_class m = (l * sk.mu()) % pk.n();
  global_op_counter().count_decrypt();
  return {std::move(m), c.exponent};
}

/// A ciphertext from a different key decrypts to garbage; nothing here can
/// tell, so callers rely on their own tolerance checks.
inline double decrypt(const PrivateKey& sk, const Ciphertext& c) {
  return decode(sk.public_key(), decrypt_encoded(sk, c));
}

namespace detail {

/// Multiplies the hidden mantissa by 16^(c.exponent - target).
inline Ciphertext lower_exponent(const PublicKey& pk, const Ciphertext& c, std::int32_t target) {
  const long shift_bits = static_cast<long>(c.exponent - target) * kLog2EncodingBase;
  if (shift_bits >= static_cast<long>(pk.key_bits()) - 2) {
    throw OverflowError("add: exponent alignment exceeds the plaintext range");
  }
  mpz_class factor = mpz_class(1) << static_cast<mp_bitcnt_t>(shift_bits);
  mpz_class out;
  mpz_powm(out.get_mpz_t(), c.value.get_mpz_t(), factor.get_mpz_t(), pk.n_squared().get_mpz_t());
  return {std::move(out), target};
}

}  // namespace detail

/// Homomorphic addition; the operand with the larger exponent is rescaled
/// down to the smaller one.
inline Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  global_op_counter().count_add();
  const std::int32_t target = std::min(a.exponent, b.exponent);
  const Ciphertext& lhs = a.exponent > target ? detail::lower_exponent(pk, a, target) : a;
  const Ciphertext& rhs = b.exponent > target ? detail::lower_exponent(pk, b, target) : b;
  mpz_class out = (lhs.value * rhs.value) % pk.n_squared();
  return {std::move(out), target};
}

/// Homomorphic multiplication by a plaintext scalar: c^s mod n^2.
inline Ciphertext scalar_mul(const PublicKey& pk, const Ciphertext& c, double scalar) {
  const FixedPoint s = to_fixed_point_normalized(scalar);
  global_op_counter().count_mul();
  if (abs(s.value) > pk.max_int()) throw OverflowError("scalar_mul: scalar exceeds max_int");
  const long exponent = static_cast<long>(c.exponent) + s.exponent;
  if (exponent > INT32_MAX || exponent < INT32_MIN) {
    throw OverflowError("scalar_mul: exponent out of range");
  }
  mpz_class out;
  // GMP handles a negative power through the modular inverse of c.
  mpz_powm(out.get_mpz_t(), c.value.get_mpz_t(), s.value.get_mpz_t(),
           pk.n_squared().get_mpz_t());
  return {std::move(out), static_cast<std::int32_t>(exponent)};
}

// ---------------------------------------------------------------------------
// Byte-exact serialization: big-endian value padded to ceil(2*key_bits/8)
// bytes, then a big-endian two's-complement int32 exponent.

inline void serialize_into(const PublicKey& pk, const Ciphertext& c,
                           std::vector<std::uint8_t>& out) {
  const std::size_t width = pk.ciphertext_value_bytes();
  const std::size_t start = out.size();
  out.resize(start + width + kExponentBytes, 0);
  std::size_t count = 0;
  const std::size_t needed = (mpz_sizeinbase(c.value.get_mpz_t(), 2) + 7) / 8;
  if (c.value < 0 || needed > width) throw OverflowError("serialize: value wider than n^2");
  if (c.value != 0) {
    mpz_export(out.data() + start + (width - needed), &count, 1, 1, 1, 0, c.value.get_mpz_t());
  }
  const auto e = static_cast<std::uint32_t>(c.exponent);
  for (std::size_t i = 0; i < kExponentBytes; ++i) {
    out[start + width + i] = static_cast<std::uint8_t>(e >> (8 * (kExponentBytes - 1 - i)));
  }
}

inline std::vector<std::uint8_t> serialize(const PublicKey& pk, const Ciphertext& c) {
  std::vector<std::uint8_t> out;
  serialize_into(pk, c, out);
  return out;
}

inline Ciphertext deserialize(const PublicKey& pk, std::span<const std::uint8_t> bytes) {
  const std::size_t width = pk.ciphertext_value_bytes();
  if (bytes.size() != width + kExponentBytes) {
    throw ParseError("deserialize: expected " + std::to_string(width + kExponentBytes) +
                     " bytes, got " + std::to_string(bytes.size()));
  }
  Ciphertext c;
  mpz_import(c.value.get_mpz_t(), width, 1, 1, 1, 0, bytes.data());
  std::uint32_t e = 0;
  for (std::size_t i = 0; i < kExponentBytes; ++i) e = (e << 8) | bytes[width + i];
  c.exponent = static_cast<std::int32_t>(e);
  return c;
}

}  // namespace vflsim::he
