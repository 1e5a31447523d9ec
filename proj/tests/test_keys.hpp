#pragma once

#include "vflsim/he/paillier.hpp"
#include "vflsim/he/schemes.hpp"

namespace vflsim::testing {

/// One 512-bit key pair per test binary.
inline const he::KeyPair& test_keys() {
  static const he::KeyPair keys = he::keygen(512, 20240607);
  return keys;
}

inline he::PaillierScheme test_scheme() { return he::PaillierScheme(test_keys().public_key); }
inline he::PaillierDecryptor test_decryptor() {
  return he::PaillierDecryptor(test_keys().private_key);
}

}  // namespace vflsim::testing
