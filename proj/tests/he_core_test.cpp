#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <type_traits>

#include "oracles.hpp"
#include "vflsim/he/key_io.hpp"
#include "vflsim/he/paillier.hpp"

namespace vflsim::he {
namespace {

class PaillierTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { keys_ = new KeyPair(keygen(512, 7)); }
  static void TearDownTestSuite() { delete keys_; }
  const PublicKey& pk() const { return keys_->public_key; }
  const PrivateKey& sk() const { return keys_->private_key; }

  static KeyPair* keys_;
  Rng rng_{11};
};
KeyPair* PaillierTest::keys_ = nullptr;

TEST(KeygenTest, ModulusHasExactlyKeyBits) {
  for (unsigned bits : {512u, 1024u, 2048u}) {
    const KeyPair kp = keygen(bits, 3);
    EXPECT_EQ(kp.public_key.key_bits(), bits);
    EXPECT_EQ(mpz_sizeinbase(kp.public_key.n().get_mpz_t(), 2), bits);
    EXPECT_EQ(kp.public_key.n_squared(), kp.public_key.n() * kp.public_key.n());
    EXPECT_EQ(kp.public_key.g(), kp.public_key.n() + 1);
  }
}

TEST(KeygenTest, DeterministicGivenSeed) {
  const KeyPair a = keygen(512, 7);
  const KeyPair b = keygen(512, 7);
  const KeyPair c = keygen(512, 8);
  EXPECT_EQ(a.public_key, b.public_key);
  EXPECT_EQ(a.private_key.lambda(), b.private_key.lambda());
  EXPECT_FALSE(a.public_key == c.public_key);
}

TEST(KeygenTest, RejectsSmallKeysOutsideTestMode) {
  const char* saved = std::getenv("VFLSIM_TEST_MODE");
  const std::string restore = saved ? saved : "";
  unsetenv("VFLSIM_TEST_MODE");
  EXPECT_THROW(keygen(256, 1), ConfigError);
  EXPECT_NO_THROW(keygen(512, 1));
  setenv("VFLSIM_TEST_MODE", "1", 1);
  EXPECT_NO_THROW(keygen(256, 1));
  EXPECT_THROW(keygen(255, 1), ConfigError);
  if (saved) {
    setenv("VFLSIM_TEST_MODE", restore.c_str(), 1);
  } else {
    unsetenv("VFLSIM_TEST_MODE");
  }
}

TEST(KeyIsolation, PrivateKeyCannotBeBuiltFromPublicMaterial) {
  static_assert(!std::is_default_constructible_v<PrivateKey>);
  static_assert(!std::is_constructible_v<PrivateKey, const PublicKey&>);
  static_assert(!std::is_constructible_v<PrivateKey, const mpz_class&>);
  // Export needs the explicit unsafe tag.
  static_assert(!std::is_invocable_v<decltype(&export_private_key), const PrivateKey&>);
  SUCCEED();
}

TEST_F(PaillierTest, RawRoundtripOverRandomPlaintexts) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 100; ++i) {
    mpz_class m = Rng(gen()).below(pk().n());
    const Ciphertext c = encrypt_encoded(pk(), EncodedNumber{m, 0}, rng_);
    EXPECT_EQ(decrypt_encoded(sk(), c).mantissa, m);
  }
}

TEST_F(PaillierTest, EncryptDecryptExactValues) {
  EXPECT_EQ(decrypt(sk(), encrypt(pk(), 42.0, rng_)), 42.0);
  EXPECT_EQ(decrypt(sk(), encrypt(pk(), 0.125, rng_)), 0.125);
  EXPECT_EQ(decrypt(sk(), encrypt(pk(), -3.5, rng_)), -3.5);
  EXPECT_EQ(decrypt(sk(), encrypt(pk(), 0.0, rng_)), 0.0);
  EXPECT_EQ(decrypt(sk(), encrypt(pk(), 1e-300, rng_)), 1e-300);
  EXPECT_EQ(decrypt(sk(), encrypt(pk(), -7.25e200, rng_)), -7.25e200);
}

TEST_F(PaillierTest, EncryptionIsRandomized) {
  const Ciphertext a = encrypt(pk(), 1.0, rng_);
  const Ciphertext b = encrypt(pk(), 1.0, rng_);
  EXPECT_NE(a.value, b.value);
  EXPECT_EQ(decrypt(sk(), a), 1.0);
  EXPECT_EQ(decrypt(sk(), b), 1.0);
}

TEST_F(PaillierTest, EncryptionDeterministicGivenRngSeed) {
  Rng r1(99);
  Rng r2(99);
  EXPECT_EQ(encrypt(pk(), 2.5, r1), encrypt(pk(), 2.5, r2));
}

TEST_F(PaillierTest, AdditiveHomomorphism) {
  EXPECT_EQ(decrypt(sk(), add(pk(), encrypt(pk(), 3, rng_), encrypt(pk(), 4, rng_))), 7.0);
  const Ciphertext x = encrypt(pk(), -1.75, rng_);
  EXPECT_EQ(decrypt(sk(), add(pk(), x, encrypt(pk(), 0.0, rng_))), -1.75);
  const Ciphertext y = encrypt(pk(), 1e-9, rng_);
  EXPECT_EQ(decrypt(sk(), add(pk(), x, y)), decrypt(sk(), add(pk(), y, x)));
}

TEST_F(PaillierTest, ScalarHomomorphism) {
  EXPECT_NEAR(decrypt(sk(), scalar_mul(pk(), encrypt(pk(), 2.5, rng_), 4)), 10.0, 1e-9);
  EXPECT_EQ(decrypt(sk(), scalar_mul(pk(), encrypt(pk(), 3, rng_), -2)), -6.0);
  EXPECT_EQ(decrypt(sk(), scalar_mul(pk(), encrypt(pk(), 0.3, rng_), 1)), 0.3);
  EXPECT_EQ(decrypt(sk(), scalar_mul(pk(), encrypt(pk(), 0.3, rng_), 0)), 0.0);
}

TEST_F(PaillierTest, ScalarMulIncrementsCounterByOne) {
  const Ciphertext c = encrypt(pk(), 1.5, rng_);
  const OpCounts before = global_op_counter().snapshot();
  (void)scalar_mul(pk(), c, 3.0);
  const OpCounts delta = global_op_counter().snapshot() - before;
  EXPECT_EQ(delta.enc_mul, 1u);
  EXPECT_EQ(delta.enc_add, 0u);
  EXPECT_EQ(delta.encryptions, 0u);
}

// Exact-rational oracle: the decrypted fixed-point value may differ from the
// true rational result by at most two units in its last base-16 place.
TEST_F(PaillierTest, PropertyHomomorphismWithinTwoUnitsOfLastPlace) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> mag(-8.0, 8.0);
  std::uniform_real_distribution<double> sig(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double x = sig(gen) * std::pow(10.0, mag(gen));
    const double y = sig(gen) * std::pow(10.0, mag(gen));
    const double s = sig(gen) * std::pow(10.0, mag(gen) / 2);
    const EncodedNumber sum =
        decrypt_encoded(sk(), add(pk(), encrypt(pk(), x, rng_), encrypt(pk(), y, rng_)));
    EXPECT_TRUE(testing_oracles::within_fixed_point_units(pk(), sum,
                                                          testing_oracles::exact(x) +
                                                              testing_oracles::exact(y),
                                                          2))
        << x << " + " << y;
    const EncodedNumber prod = decrypt_encoded(sk(), scalar_mul(pk(), encrypt(pk(), x, rng_), s));
    EXPECT_TRUE(testing_oracles::within_fixed_point_units(
        pk(), prod, testing_oracles::exact(x) * testing_oracles::exact(s), 2))
        << x << " * " << s;
  }
}

TEST_F(PaillierTest, NonFiniteInputOverflows) {
  EXPECT_THROW(encrypt(pk(), std::numeric_limits<double>::infinity(), rng_), OverflowError);
  EXPECT_THROW(encrypt(pk(), std::nan(""), rng_), OverflowError);
}

TEST_F(PaillierTest, AlignmentBeyondPlaintextRangeOverflows) {
  const Ciphertext big = encrypt(pk(), 1e300, rng_);
  const Ciphertext tiny = encrypt(pk(), 1e-300, rng_);
  EXPECT_THROW(add(pk(), big, tiny), OverflowError);
}

TEST_F(PaillierTest, WraparoundIntoForbiddenBandIsDetected) {
  // max_int + max_int lands in the middle third.
  const EncodedNumber edge{pk().max_int(), 0};
  const Ciphertext c = encrypt_encoded(pk(), edge, rng_);
  EXPECT_THROW(decrypt(sk(), add(pk(), c, c)), OverflowError);
}

TEST(SerializationTest, LengthIsFixedByKeySize) {
  Rng rng(1);
  const KeyPair k2048 = keygen(2048, 1);
  EXPECT_EQ(serialize(k2048.public_key, encrypt(k2048.public_key, 0.5, rng)).size(), 512u + 4u);
  const KeyPair k1024 = keygen(1024, 1);
  const Ciphertext c = encrypt(k1024.public_key, -12.5, rng);
  const auto bytes = serialize(k1024.public_key, c);
  EXPECT_EQ(bytes.size(), 256u + 4u);
  EXPECT_EQ(deserialize(k1024.public_key, bytes), c);
}

TEST_F(PaillierTest, SerializationRoundtripIsBitwise) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> dist(0.0, 1e3);
  for (int i = 0; i < 20; ++i) {
    const Ciphertext c = scalar_mul(pk(), encrypt(pk(), dist(gen), rng_), dist(gen));
    const auto bytes = serialize(pk(), c);
    ASSERT_EQ(bytes.size(), pk().ciphertext_bytes());
    EXPECT_EQ(deserialize(pk(), bytes), c);
  }
}

TEST_F(PaillierTest, DeserializeRejectsWrongLength) {
  auto bytes = serialize(pk(), encrypt(pk(), 1.0, rng_));
  bytes.pop_back();
  EXPECT_THROW(deserialize(pk(), bytes), ParseError);
}

TEST_F(PaillierTest, KeyExportRoundtrip) {
  const std::string pub = export_public_key(pk());
  EXPECT_NE(pub.find("BEGIN VFLSIM PAILLIER PUBLIC KEY"), std::string::npos);
  EXPECT_EQ(pub.find("PRIVATE"), std::string::npos);
  EXPECT_EQ(import_public_key(pub), pk());

  const std::string priv = export_private_key(sk(), UnsafeExport::allow_private_key);
  const PrivateKey restored = import_private_key(priv, UnsafeExport::allow_private_key);
  EXPECT_EQ(restored.public_key(), pk());
  EXPECT_EQ(decrypt(restored, encrypt(pk(), 6.5, rng_)), 6.5);
  EXPECT_THROW(import_public_key(priv), ParseError);
}

}  // namespace
}  // namespace vflsim::he
