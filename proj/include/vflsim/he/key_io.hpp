#pragma once

// PEM-like text export of Paillier keys. A block is
//   -----BEGIN VFLSIM PAILLIER <KIND> KEY-----
//   base64 body, 64 columns
//   -----END VFLSIM PAILLIER <KIND> KEY-----
// Body layout: a sequence of fields, each a 4-byte big-endian length followed
// by the big-endian magnitude. Public: [n]. Private: [p, q].

#include <openssl/evp.h>

#include <sstream>
#include <string>
#include <vector>

#include "vflsim/he/paillier.hpp"

namespace vflsim::he {

/// Tag that has to be passed explicitly to export private material.
enum class UnsafeExport { allow_private_key };

namespace detail {

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                      bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw ParseError("key: base64 body length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int written = EVP_DecodeBlock(out.data(),
                                      reinterpret_cast<const unsigned char*>(text.data()),
                                      static_cast<int>(text.size()));
  if (written < 0) throw ParseError("key: invalid base64");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(written) - padding);
  return out;
}

inline void append_field(std::vector<std::uint8_t>& out, const mpz_class& v) {
  const std::size_t len = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  const std::size_t start = out.size();
  out.resize(start + len);
  std::size_t count = 0;
  mpz_export(out.data() + start, &count, 1, 1, 1, 0, v.get_mpz_t());
}

inline std::vector<mpz_class> read_fields(const std::vector<std::uint8_t>& in) {
  std::vector<mpz_class> fields;
  std::size_t pos = 0;
  while (pos < in.size()) {
    if (pos + 4 > in.size()) throw ParseError("key: truncated field header");
    std::size_t len = 0;
    for (int i = 0; i < 4; ++i) len = (len << 8) | in[pos++];
    if (pos + len > in.size()) throw ParseError("key: truncated field");
    mpz_class v;
    mpz_import(v.get_mpz_t(), len, 1, 1, 1, 0, in.data() + pos);
    pos += len;
    fields.push_back(std::move(v));
  }
  return fields;
}

inline std::string armor(const std::string& kind, const std::vector<std::uint8_t>& body) {
  const std::string b64 = base64_encode(body);
  std::ostringstream os;
  os << "-----BEGIN VFLSIM PAILLIER " << kind << " KEY-----\n";
  for (std::size_t i = 0; i < b64.size(); i += 64) os << b64.substr(i, 64) << '\n';
  os << "-----END VFLSIM PAILLIER " << kind << " KEY-----\n";
  return os.str();
}

inline std::vector<mpz_class> dearmor(const std::string& kind, const std::string& text) {
  const std::string begin = "-----BEGIN VFLSIM PAILLIER " + kind + " KEY-----";
  const std::string end = "-----END VFLSIM PAILLIER " + kind + " KEY-----";
  const auto b = text.find(begin);
  const auto e = text.find(end);
  if (b == std::string::npos || e == std::string::npos || e < b) {
    throw ParseError("key: missing " + kind + " key armor");
  }
  std::string body;
  for (std::size_t i = b + begin.size(); i < e; ++i) {
    if (text[i] != '\n' && text[i] != '\r') body.push_back(text[i]);
  }
  return read_fields(base64_decode(body));
}

}  // namespace detail

inline std::string export_public_key(const PublicKey& pk) {
  std::vector<std::uint8_t> body;
  detail::append_field(body, pk.n());
  return detail::armor("PUBLIC", body);
}

inline PublicKey import_public_key(const std::string& text) {
  auto fields = detail::dearmor("PUBLIC", text);
  if (fields.size() != 1) throw ParseError("key: public key expects one field");
  return PublicKey(std::move(fields[0]));
}

inline std::string export_private_key(const PrivateKey& sk, UnsafeExport) {
  const auto [p, q] = UnsafePrivateKeyAccess::primes(sk);
  std::vector<std::uint8_t> body;
  detail::append_field(body, p);
  detail::append_field(body, q);
  return detail::armor("PRIVATE", body);
}

inline PrivateKey import_private_key(const std::string& text, UnsafeExport) {
  auto fields = detail::dearmor("PRIVATE", text);
  if (fields.size() != 2) throw ParseError("key: private key expects two fields");
  return UnsafePrivateKeyAccess::from_primes(fields[0], fields[1]);
}

}  // namespace vflsim::he
