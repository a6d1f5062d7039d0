#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "helpers.hpp"
#include "mlock/dtype.hpp"
#include "mlock/errors.hpp"
#include "oracle_values.hpp"

using namespace mlock;

TEST(Sha256, KnownAnswers) {
  EXPECT_EQ(to_hex(sha256(std::string_view{})), oracle::kSha256Empty);
  EXPECT_EQ(to_hex(sha256(std::string_view{"abc"})), oracle::kSha256Abc);
}

TEST(AesCtr, NistVector) {
  const Key256 key = testutil::key_from_hex(oracle::kAesKey);
  Nonce iv{};
  const Bytes ivb = from_hex(oracle::kAesIv);
  std::copy(ivb.begin(), ivb.end(), iv.begin());
  const Bytes ct = aes256_ctr(key, iv, from_hex(oracle::kAesPlain));
  EXPECT_EQ(to_hex(ct), oracle::kAesCipher);
  EXPECT_EQ(to_hex(aes256_ctr(key, iv, ct)), oracle::kAesPlain);
}

TEST(AesCtr, CounterCarriesAcross64Bits) {
  const Key256 key = testutil::key_from_hex(oracle::kAesKey);
  Nonce iv{};
  const Bytes ivb = from_hex(oracle::kAesWrapIv);
  std::copy(ivb.begin(), ivb.end(), iv.begin());
  EXPECT_EQ(to_hex(aes256_ctr_keystream(key, iv, 48)), oracle::kAesWrapStream);
}

TEST(KeyedStream, ContinuesAcrossRefills) {
  // Words past the internal buffer must continue the same CTR stream.
  const Key256 key = testutil::key_from_hex(oracle::kKeyClock4b85a);
  KeyedStream ks(key);
  const Bytes stream = aes256_ctr_keystream(key, Nonce{}, 8 * 1100);
  for (std::size_t w = 0; w < 1100; ++w) {
    std::uint64_t expect = 0;
    for (int b = 7; b >= 0; --b) expect = (expect << 8) | stream[w * 8 + static_cast<std::size_t>(b)];
    ASSERT_EQ(ks.next_u64(), expect) << "word " << w;
  }
}

TEST(Hex, RoundTripAndErrors) {
  const Bytes b = {0x00, 0xab, 0xff};
  EXPECT_EQ(to_hex(b), "00abff");
  EXPECT_EQ(from_hex("00ABff"), b);
  EXPECT_THROW(from_hex("abc"), InvalidArgument);
  EXPECT_THROW(from_hex("zz"), InvalidArgument);
}

// ---------------------------------------------------------------------------

TEST(Dtype, Fp16MatchesNumpy) {
  for (const auto& c : oracle::kFp16Cases) {
    EXPECT_EQ(encode_value(c.x, Dtype::FP16), c.code) << c.x;
  }
}

TEST(Dtype, MiniFloat16MatchesBruteForce) {
  for (const auto& c : oracle::kMiniFloat16Cases) {
    EXPECT_EQ(encode_value(c.x, Dtype::MiniFloat16), c.code) << c.x;
  }
}

TEST(Dtype, MiniFloat8MatchesBruteForce) {
  for (const auto& c : oracle::kMiniFloat8Cases) {
    EXPECT_EQ(encode_value(c.x, Dtype::MiniFloat8), c.code) << c.x;
  }
}

TEST(Dtype, DecodeEncodeIsIdentityOnEveryNonNanCode) {
  for (Dtype d : {Dtype::FP16, Dtype::MiniFloat16, Dtype::MiniFloat8}) {
    const std::uint32_t n = 1u << bit_width(d);
    for (std::uint32_t c = 0; c < n; ++c) {
      const double v = decode_value(c, d);
      if (std::isnan(v)) continue;
      ASSERT_EQ(encode_value(v, d), c) << dtype_name(d) << " code " << c;
    }
  }
}

TEST(Dtype, MaxFiniteValues) {
  EXPECT_EQ(minifloat_max_finite(kHalf), 65504.0);
  EXPECT_EQ(minifloat_max_finite(kMiniFloat8), 240.0);  // 1.875 * 2^7
  EXPECT_EQ(minifloat_max_finite(kMiniFloat16), 1048064.0);  // (2 - 2^-10) * 2^19
}

TEST(Dtype, SaturateClampsInsteadOfOverflowing) {
  const auto sat = minifloat_encode(1e9, kMiniFloat8, Overflow::Saturate);
  EXPECT_EQ(minifloat_decode(sat, kMiniFloat8), 240.0);
  EXPECT_TRUE(std::isinf(minifloat_decode(minifloat_encode(1e9, kMiniFloat8), kMiniFloat8)));
}

TEST(Dtype, OrderKeyIsMonotone) {
  for (Dtype d : {Dtype::FP16, Dtype::MiniFloat8, Dtype::INT8}) {
    const std::uint32_t n = 1u << bit_width(d);
    double prev = -INFINITY;
    for (std::uint32_t k = 0; k < n; ++k) {
      const std::uint32_t c = code_from_order_key(k, d);
      ASSERT_EQ(order_key(c, d), k);
      const double v = decode_value(c, d);
      if (std::isnan(v)) continue;
      ASSERT_GE(v, prev) << dtype_name(d) << " key " << k;
      prev = v;
    }
  }
}

TEST(Dtype, Int8AffineHandExample) {
  // w = [-1.0, 0.5, 1.27], scale = 1.27 / 127 = 0.01.
  const AffineParams p{0.01f, 0};
  EXPECT_EQ(int8_encode(-1.0, p), -100);
  EXPECT_EQ(int8_encode(0.5, p), 50);
  EXPECT_EQ(int8_encode(1.27, p), 127);
  EXPECT_NEAR(int8_decode(127, p), 1.27, 1e-6);
  EXPECT_EQ(int8_encode(5.0, p), 127);  // clamps
}

TEST(Dtype, NamesRoundTrip) {
  for (Dtype d : {Dtype::FP32, Dtype::FP16, Dtype::MiniFloat16, Dtype::MiniFloat8, Dtype::INT8}) {
    EXPECT_EQ(parse_dtype(dtype_name(d)), d);
  }
  EXPECT_FALSE(parse_dtype("bf16"));
  EXPECT_FALSE(dtype_from_tag(5));
}
