#pragma once

// Vector operations over ciphertexts and plaintext matrices. Every
// homomorphic operation goes through the scheme, so the global op counter
// sees exactly one enc_mul per (sample, feature) pair on the gradient path.

#include <span>
#include <vector>

#include "vflsim/error.hpp"
#include "vflsim/he/schemes.hpp"
#include "vflsim/linalg/matrix.hpp"

namespace vflsim::linalg {

template <class Scheme>
using CipherVector = std::vector<typename Scheme::cipher_type>;

template <he::HomomorphicScheme Scheme>
CipherVector<Scheme> encrypt_vector(const Scheme& scheme, std::span<const double> values,
                                    he::Rng& rng) {
  CipherVector<Scheme> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(scheme.encrypt(v, rng));
  return out;
}

template <class Decryptor, class Cipher>
Vector decrypt_vector(const Decryptor& decryptor, std::span<const Cipher> values) {
  Vector out;
  out.reserve(values.size());
  for (const auto& c : values) out.push_back(decryptor.decrypt(c));
  return out;
}

template <he::HomomorphicScheme Scheme>
CipherVector<Scheme> cv_add(const Scheme& scheme,
                            std::span<const typename Scheme::cipher_type> a,
                            std::span<const typename Scheme::cipher_type> b) {
  detail::require_shape(a.size() == b.size(), "cv_add: length mismatch");
  CipherVector<Scheme> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(scheme.add(a[i], b[i]));
  return out;
}

/// Sum_i d_i * x_i. Costs m enc_mul and m - 1 enc_add.
template <he::HomomorphicScheme Scheme>
typename Scheme::cipher_type cv_dot_plain(const Scheme& scheme,
                                          std::span<const typename Scheme::cipher_type> d,
                                          std::span<const double> x) {
  detail::require_shape(d.size() == x.size(), "cv_dot_plain: length mismatch");
  detail::require_shape(!d.empty(), "cv_dot_plain: empty vector");
  auto acc = scheme.scalar_mul(d[0], x[0]);
  for (std::size_t i = 1; i < d.size(); ++i) acc = scheme.add(acc, scheme.scalar_mul(d[i], x[i]));
  return acc;
}

/// X^T d, one column at a time. Costs exactly rows * cols enc_mul.
template <he::HomomorphicScheme Scheme>
CipherVector<Scheme> encrypted_gradient_matvec(const Scheme& scheme,
                                               std::span<const typename Scheme::cipher_type> d,
                                               const Matrix& x) {
  detail::require_shape(d.size() == x.rows(), "encrypted_gradient_matvec: rows != |d|");
  CipherVector<Scheme> out;
  out.reserve(x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const Vector column = x.column(c);
    out.push_back(cv_dot_plain(scheme, d, std::span<const double>(column)));
  }
  return out;
}

}  // namespace vflsim::linalg
