#pragma once

#include <atomic>
#include <cstdint>

namespace vflsim::he {

/// Plain snapshot of the encrypted-operation counters.
struct OpCounts {
  std::uint64_t enc_mul = 0;
  std::uint64_t enc_add = 0;
  std::uint64_t encryptions = 0;
  std::uint64_t decryptions = 0;

  friend bool operator==(const OpCounts&, const OpCounts&) = default;

  friend OpCounts operator-(const OpCounts& a, const OpCounts& b) {
    return {a.enc_mul - b.enc_mul, a.enc_add - b.enc_add,
            a.encryptions - b.encryptions, a.decryptions - b.decryptions};
  }
  friend OpCounts operator+(const OpCounts& a, const OpCounts& b) {
    return {a.enc_mul + b.enc_mul, a.enc_add + b.enc_add,
            a.encryptions + b.encryptions, a.decryptions + b.decryptions};
  }
  OpCounts& operator+=(const OpCounts& o) { return *this = *this + o; }
};

/// Process-wide counters. Relaxed atomics: callers only need totals, and
/// summation is associative, so parallel regions aggregate correctly.
class OpCounter {
 public:
  void count_mul(std::uint64_t n = 1) { enc_mul_.fetch_add(n, std::memory_order_relaxed); }
  void count_add(std::uint64_t n = 1) { enc_add_.fetch_add(n, std::memory_order_relaxed); }
  void count_encrypt(std::uint64_t n = 1) {
    encryptions_.fetch_add(n, std::memory_order_relaxed);
  }
  void count_decrypt(std::uint64_t n = 1) {
    decryptions_.fetch_add(n, std::memory_order_relaxed);
  }

  OpCounts snapshot() const {
    return {enc_mul_.load(std::memory_order_relaxed), enc_add_.load(std::memory_order_relaxed),
            encryptions_.load(std::memory_order_relaxed),
            decryptions_.load(std::memory_order_relaxed)};
  }

  void reset() {
    enc_mul_ = 0;
    enc_add_ = 0;
    encryptions_ = 0;
    decryptions_ = 0;
  }

 private:
  std::atomic<std::uint64_t> enc_mul_{0};
  std::atomic<std::uint64_t> enc_add_{0};
  std::atomic<std::uint64_t> encryptions_{0};
  std::atomic<std::uint64_t> decryptions_{0};
};

inline OpCounter& global_op_counter() {
  static OpCounter counter;
  return counter;
}

}  // namespace vflsim::he
