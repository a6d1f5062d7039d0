#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "mlock/distinguisher.hpp"
#include "mlock/errors.hpp"
#include "mlock/fingerprint.hpp"
#include "mlock/pretransform.hpp"
#include "mlock/transform.hpp"
#include "oracle_values.hpp"

using namespace mlock;

// ---------------------------------------------------------------------------
// Pre-transforms

TEST(GaussianCdf, KnownValues) {
  EXPECT_DOUBLE_EQ(gaussian_cdf(3.0, 3.0, 2.0), 0.5);
  EXPECT_NEAR(gaussian_cdf(1.0, 0.0, 1.0), oracle::kPhi1, 1e-12);
  EXPECT_NEAR(gaussian_cdf(-4.0, 0.0, 2.0), oracle::kPhiMinus2, 1e-12);
  EXPECT_EQ(gaussian_cdf(INFINITY, 0.0, 1.0), 1.0);
  EXPECT_EQ(gaussian_cdf(-INFINITY, 0.0, 1.0), 0.0);
  EXPECT_NEAR(gaussian_quantile(0.975), oracle::kQuantile0975, 1e-9);
  EXPECT_THROW(gaussian_cdf(0.0, 0.0, 0.0), InvalidArgument);
  EXPECT_THROW(gaussian_quantile(1.0), InvalidArgument);
}

TEST(EmpiricalLut, UniformStoreGivesIdentityWidths) {
  // Every FP16 code once: each code owns exactly one slot.
  ParamTensor t{"w", {65536}, Dtype::FP16, Bytes(2 * 65536)};
  for (std::uint32_t c = 0; c < 65536; ++c) t.set_code(c, c);
  ParamStore s;
  s.add(std::move(t));
  const EmpiricalLut lut = build_empirical_pretransform(s, 16);
  ASSERT_EQ(lut.codes.size(), 65536u);
  for (std::size_t i = 0; i < lut.codes.size(); ++i) ASSERT_EQ(lut.width(i), 1u);
  const Bytes enc = pretransform_encode(s, lut, 0);
  std::array<std::uint64_t, 256> before{}, after{};
  for (auto b : flatten(s)) ++before[b];
  for (auto b : enc) ++after[b];
  EXPECT_EQ(before, after);
}

TEST(EmpiricalLut, InverseOfForwardOnEveryPresentFp16Code) {
  const ParamStore s = testutil::gaussian_store_dtype(4, Dtype::FP16, 200000);
  const EmpiricalLut lut = build_empirical_pretransform(s, 16);
  const auto fwd = lut.dense_forward();
  const auto inv = lut.dense_inverse();
  for (std::uint32_t c : lut.codes) ASSERT_EQ(inv[fwd[c]], c);
  EXPECT_EQ(EmpiricalLut::from_dense(Dtype::FP16, fwd, inv), lut);
  // Intervals tile the code space.
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < lut.codes.size(); ++i) total += lut.width(i);
  EXPECT_EQ(total, 65536u);
}

TEST(EmpiricalLut, EncodeDecodeRoundTrip) {
  for (Dtype d : {Dtype::FP16, Dtype::MiniFloat8, Dtype::FP32}) {
    const ParamStore s = testutil::gaussian_store_dtype(5, d, 5000);
    const EmpiricalLut lut = build_empirical_pretransform(s, bit_width(d));
    const Bytes enc = pretransform_encode(s, lut, 77);
    EXPECT_EQ(flatten(pretransform_decode(enc, s.schema(), lut)), flatten(s)) << dtype_name(d);
  }
}

TEST(EmpiricalLut, LargeFp16StoreLooksUniform) {
  // Pigeonhole: with more distinct codes present than a perfectly flat
  // byte histogram allows, the check is reported rather than asserted.
  const ParamStore s = testutil::gaussian_store_dtype(6, Dtype::FP16, 1000000);
  const EmpiricalLut lut = build_empirical_pretransform(s, 16);
  const Bytes enc = pretransform_encode(s, lut, 1);
  const TestResult r = uniformity_chi2(enc);
  RecordProperty("fp16_1e6_uniformity_p", std::to_string(r.p_value));
  // FP32 at the same size has room for every present code.
  const ParamStore s32 = testutil::gaussian_store_dtype(6, Dtype::FP32, 1000000);
  const EmpiricalLut lut32 = build_empirical_pretransform(s32, 32);
  EXPECT_GT(uniformity_chi2(pretransform_encode(s32, lut32, 1)).p_value, 0.01);
}

TEST(EmpiricalLut, RejectsBadPrecision) {
  const ParamStore s = testutil::gaussian_store_dtype(1, Dtype::FP16, 10);
  EXPECT_THROW(build_empirical_pretransform(s, 33), CapacityError);
  EXPECT_THROW(build_empirical_pretransform(s, 8), InvalidArgument);
}

TEST(GaussianPretransform, OutlierSaturatesButStaysFinite) {
  ParamStore s = testutil::gaussian_store_dtype(2, Dtype::FP16, 4000);
  const GaussianPretransform g = fit_gaussian_pretransform(s);
  // 60 sigma outlier placed after fitting.
  s.mutable_tensors()[0].set_code(0, encode_value(g.mean + 60 * g.stddev, Dtype::FP16));
  EncodeStats st;
  const Bytes enc = pretransform_encode(s, g, 0, &st);
  EXPECT_GE(st.saturated, 1u);
  const ParamStore dec = pretransform_decode(enc, s.schema(), g);
  for (float v : dec.all_values()) ASSERT_TRUE(std::isfinite(v));
}

TEST(GaussianPretransform, RejectsInt8AndMixedDtypes) {
  const ParamStore q = testutil::gaussian_store_dtype(1, Dtype::INT8, 100);
  EXPECT_THROW(fit_gaussian_pretransform(q), DescriptorError);
  ParamStore mixed = testutil::gaussian_store(1, 1);
  mixed.add(ParamTensor{"h", {2}, Dtype::FP16, Bytes(4)});
  EXPECT_THROW(uniform_dtype(mixed), DescriptorError);
}

// ---------------------------------------------------------------------------
// Locking

namespace {

const Key256 kKey = testutil::key_from_hex(oracle::kKeyClock4b85a);

LockedModel lock_kind(const ParamStore& s, const Key256& k, TransformKind kind) {
  std::optional<PreTransform> pre;
  if (kind == TransformKind::PretransformedAES) pre = build_empirical_pretransform(s, bit_width(uniform_dtype(s)));
  return lock(s, k, kind, pre);
}

constexpr TransformKind kKinds[] = {TransformKind::AES, TransformKind::Shuffle, TransformKind::PretransformedAES};

}  // namespace

TEST(Lock, RoundTripEveryKind) {
  for (TransformKind kind : kKinds) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ParamStore s = testutil::gaussian_store(seed);
      const LockedModel l = lock_kind(s, kKey, kind);
      EXPECT_EQ(unlock(l, kKey), s) << kind_name(kind);
      EXPECT_EQ(deserialize_locked(serialize_locked(l)), l);
    }
  }
}

TEST(Lock, AesPayloadFlipsAboutHalfTheBits) {
  const ParamStore s = testutil::gaussian_store(3, 4, 64);
  const LockedModel l = aes_lock(s, kKey);
  const Bytes plain = flatten(s);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < plain.size(); ++i) diff += std::popcount(static_cast<unsigned>(plain[i] ^ l.payload[i]));
  EXPECT_GE(static_cast<double>(diff) / (8.0 * plain.size()), 0.49);
}

TEST(Lock, AesWrongKeyBytesAreUniform) {
  const ParamStore s = testutil::gaussian_store_dtype(7, Dtype::FP32, 20000);
  const LockedModel l = aes_lock(s, kKey);
  Key256 wrong = kKey;
  wrong[0] ^= 1;
  const ParamStore bad = aes_unlock(l, wrong);
  EXPECT_GT(uniformity_chi2(flatten(bad)).p_value, 1e-4);
  EXPECT_LT(uniformity_chi2(flatten(s)).p_value, 1e-12);
}

TEST(Lock, SuppliedNonceIsDeterministic) {
  const ParamStore s = testutil::gaussian_store(1);
  Nonce n{};
  n[3] = 9;
  EXPECT_EQ(aes_lock(s, kKey, n).payload, aes_lock(s, kKey, n).payload);
  EXPECT_NE(aes_lock(s, kKey).descriptor.nonce, aes_lock(s, kKey).descriptor.nonce);
}

TEST(Shuffle, MatchesIndependentPermutation) {
  std::vector<float> v(16);
  for (int i = 0; i < 16; ++i) v[static_cast<std::size_t>(i)] = static_cast<float>(i);
  ParamStore s;
  s.add_fp32("w", {16}, v);
  shuffle_values(s, kKey);
  const auto got = s.values(0);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(got[i], oracle::kShuffled16[i]) << i;
}

TEST(Shuffle, SingleValueIsIdentity) {
  ParamStore s;
  const float x = 1.5f;
  s.add_fp32("w", {1}, std::span(&x, 1));
  const LockedModel l = shuffle_lock(s, kKey);
  EXPECT_EQ(l.payload, flatten(s));
  EXPECT_EQ(l.descriptor.nonce, Nonce{});
}

TEST(Shuffle, WrongKeyPreservesMultiset) {
  const ParamStore s = testutil::gaussian_store(8);
  const LockedModel l = shuffle_lock(s, kKey);
  Key256 wrong = kKey;
  wrong[5] ^= 0x40;
  const ParamStore bad = shuffle_unlock(l, wrong);
  auto a = s.all_values();
  auto b = bad.all_values();
  EXPECT_NE(a, b);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Shuffle, SearchSpaceDwarfsKeySpace) {
  const double log10_fact = std::lgamma(1e7 + 1.0) / std::log(10.0);
  EXPECT_NEAR(log10_fact, oracle::kLog10Factorial1e7, 1.0);
  // A 10^7-element permutation outnumbers 2^256 keys by over 6.5e7 orders of magnitude.
  EXPECT_GT(log10_fact - oracle::kLog10TwoPow256, 6.5e7);
}

TEST(PtAes, WrongKeyLooksLikeRealParameters) {
  const ParamStore s = testutil::gaussian_store_dtype(9, Dtype::FP16, 50000);
  const LockedModel l = lock_kind(s, kKey, TransformKind::PretransformedAES);
  Key256 wrong = kKey;
  wrong[31] ^= 0x80;
  const ParamStore bad = unlock(l, wrong);
  std::vector<double> a, b;
  for (float v : s.all_values()) a.push_back(v);
  for (float v : bad.all_values()) b.push_back(v);
  EXPECT_GT(ks_two_sample(a, b).p_value, 0.01);
}

TEST(PtAes, GaussianModeRecordsSaturation) {
  const ParamStore s = testutil::gaussian_store(2);
  const LockedModel l = pretransformed_aes_lock(s, kKey, fit_gaussian_pretransform(s));
  EXPECT_TRUE(l.meta.contains("mlock.pretransform.saturated"));
  EXPECT_FALSE(unlock(l, kKey).meta().contains("mlock.pretransform.saturated"));
}

TEST(PtAes, MissingPretransformIsDescriptorError) {
  const ParamStore s = testutil::gaussian_store(2);
  EXPECT_THROW(lock(s, kKey, TransformKind::PretransformedAES), DescriptorError);
  LockedModel l = lock_kind(s, kKey, TransformKind::PretransformedAES);
  l.pretransform.reset();
  EXPECT_THROW(unlock(l, kKey), DescriptorError);
}

TEST(LockedFile, CorruptionIsDetected) {
  const ParamStore s = testutil::gaussian_store(4);
  const Bytes good = serialize_locked(lock_kind(s, kKey, TransformKind::PretransformedAES));
  Bytes magic = good;
  magic[1] = 'X';
  EXPECT_THROW(deserialize_locked(magic), FormatError);
  Bytes version = good;
  version[4] = 2;
  EXPECT_THROW(deserialize_locked(version), VersionError);
  EXPECT_THROW(deserialize_locked(Bytes(good.begin(), good.begin() + 30)), TruncatedError);
  Bytes flipped = good;
  flipped[good.size() - 50] ^= 1;
  EXPECT_THROW(deserialize_locked(flipped), ChecksumError);
}

TEST(LockedFile, KindMismatchIsDescriptorError) {
  const ParamStore s = testutil::gaussian_store(4);
  LockedModel l = aes_lock(s, kKey);
  l.descriptor.kind = TransformKind::Shuffle;
  EXPECT_THROW(aes_unlock(l, kKey), DescriptorError);
}

TEST(LockedFile, MetadataSurvivesAndLockKeysAreStripped) {
  ParamStore s = testutil::gaussian_store(4);
  s.meta()["data.seed"] = "3";
  for (TransformKind kind : kKinds) {
    const LockedModel l = deserialize_locked(serialize_locked(lock_kind(s, kKey, kind)));
    EXPECT_EQ(l.meta.at("data.seed"), "3");
    EXPECT_EQ(unlock(l, kKey).meta(), s.meta());
  }
}

TEST(TransformKind, Names) {
  for (TransformKind k : kKinds) EXPECT_EQ(parse_kind(kind_name(k)), k);
  EXPECT_FALSE(parse_kind("rot13"));
}
