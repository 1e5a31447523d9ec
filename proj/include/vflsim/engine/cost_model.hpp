#pragma once

#include <chrono>
#include <cmath>
#include <vector>

#include "vflsim/he/op_counter.hpp"
#include "vflsim/he/paillier.hpp"
#include "vflsim/netsim/network.hpp"

namespace vflsim::engine {

using netsim::SimDuration;

/// Simulated seconds charged per counted operation.
struct CostModel {
  double encrypt_s = 2.3e-3;
  double decrypt_s = 2.4e-3;
  double enc_mul_s = 1.7e-4;
  double enc_add_s = 1.0e-5;
  double plain_flop_s = 1.0e-9;
  /// Charge measured wall time instead of the per-op model. Breaks
  /// run-to-run reproducibility of the timing fields.
  bool wall_clock = false;

  /// Reference costs scaled from 1024-bit keys. Exponentiations grow
  /// roughly with the cube of the modulus size, multiplications with the
  /// square.
  static CostModel for_key_bits(int bits) {
    CostModel c;
    const double r = static_cast<double>(bits) / 1024.0;
    const double cube = r * r * r;
    c.encrypt_s *= cube;
    c.decrypt_s *= cube;
    c.enc_mul_s *= cube;
    c.enc_add_s *= r * r;
    return c;
  }

  SimDuration encryption_time(const he::OpCounts& ops) const {
    return netsim::from_seconds(static_cast<double>(ops.encryptions) * encrypt_s +
                                static_cast<double>(ops.decryptions) * decrypt_s);
  }

  /// Ciphertext arithmetic is charged at encrypted rates only when the
  /// scheme actually encrypts.
  SimDuration computation_time(const he::OpCounts& ops, double flops, bool encrypted) const {
    const double mul = encrypted ? enc_mul_s : plain_flop_s;
    const double add = encrypted ? enc_add_s : plain_flop_s;
    return netsim::from_seconds(static_cast<double>(ops.enc_mul) * mul +
                                static_cast<double>(ops.enc_add) * add + flops * plain_flop_s);
  }
};

/// Times each Paillier operation on this machine. `samples` operations are
/// timed per kind; the operation counter is left untouched.
inline CostModel calibrate(const he::KeyPair& keys, int samples = 50) {
  using clock = std::chrono::steady_clock;
  const auto& pk = keys.public_key;
  he::Rng rng(12345);
  const he::OpCounts saved = he::global_op_counter().snapshot();
  std::vector<he::Ciphertext> cs;
  CostModel c;
  auto per_op = [&](auto&& fn) {
    const auto t0 = clock::now();
    for (int i = 0; i < samples; ++i) fn(i);
    return std::chrono::duration<double>(clock::now() - t0).count() / samples;
  };
  c.encrypt_s = per_op([&](int i) { cs.push_back(he::encrypt(pk, 0.37 * i - 3.0, rng)); });
  c.enc_mul_s = per_op([&](int i) { (void)he::scalar_mul(pk, cs[static_cast<std::size_t>(i)], 1.7 * i + 0.3); });
  c.enc_add_s = per_op([&](int i) {
    (void)he::add(pk, cs[static_cast<std::size_t>(i)], cs[static_cast<std::size_t>((i + 1) % samples)]);
  });
  c.decrypt_s = per_op([&](int i) { (void)he::decrypt(keys.private_key, cs[static_cast<std::size_t>(i)]); });
  std::vector<double> v(4096, 1.0001);
  double acc = 0.0;
  const auto t0 = clock::now();
  for (int rep = 0; rep < 64; ++rep)
    for (double x : v) acc = acc * 0.999 + x;
  const double flop = std::chrono::duration<double>(clock::now() - t0).count() / (64.0 * 4096 * 2);
  c.plain_flop_s = acc > 0 ? flop : flop;  // keep the loop observable
  he::global_op_counter().reset();
  auto& counter = he::global_op_counter();
  counter.count_mul(saved.enc_mul);
  counter.count_add(saved.enc_add);
  counter.count_encrypt(saved.encryptions);
  counter.count_decrypt(saved.decryptions);
  return c;
}

}  // namespace vflsim::engine
