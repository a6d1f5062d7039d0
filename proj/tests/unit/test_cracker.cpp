#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mlock/cracker.hpp"
#include "mlock/errors.hpp"

using namespace mlock;

namespace {

struct Locked {
  ParamStore plain;
  DistributionStats reference;
};

const Locked& net_store() {
  static const Locked l = [] {
    const auto& t = testutil::trained_net();
    ParamStore s = t.net.to_store();
    return Locked{s, compute_stats(s)};
  }();
  return l;
}

}  // namespace

TEST(Candidate, FormatAndNamespace) {
  EXPECT_EQ(candidate_fingerprint(0, 0).symbols, "00000");
  EXPECT_EQ(candidate_fingerprint(0xabc, 12).symbols, "00abc");
  EXPECT_EQ(candidate_fingerprint(0x123456, 24).symbols, "123456");
  EXPECT_EQ(candidate_fingerprint(5, 12).method, FingerprintMethod::Clock);
  EXPECT_EQ(strategy_name(CrackStrategy::StatFirst), "stat");
  EXPECT_EQ(strategy_name(CrackStrategy::AccuracyOnly), "acc");
}

TEST(BruteForce, ZeroBitSpaceFindsImmediately) {
  const auto& t = testutil::trained_net();
  const LockedModel l = shuffle_lock(net_store().plain, derive_key(candidate_fingerprint(0, 0)));
  CrackConfig cfg;
  cfg.bits = 0;
  cfg.strategy = CrackStrategy::AccuracyOnly;
  const CrackReport r = brute_force(l, cfg, tinynet_oracle(t.task.test));
  ASSERT_TRUE(r.found_index);
  EXPECT_EQ(*r.found_index, 0u);
  EXPECT_EQ(r.candidates_tested, 1u);
}

TEST(BruteForce, StatFirstDiscardsWrongAesKeys) {
  const auto& t = testutil::trained_net();
  const std::uint64_t secret = 37;
  const LockedModel l = aes_lock(net_store().plain, derive_key(candidate_fingerprint(secret, 6)));
  CrackConfig cfg;
  cfg.bits = 6;
  cfg.workers = 2;
  const CrackReport r = brute_force(l, cfg, tinynet_oracle(t.task.test), &net_store().reference);
  ASSERT_TRUE(r.found_index);
  EXPECT_EQ(*r.found_index, secret);
  EXPECT_EQ(r.candidates_tested, 64u);
  EXPECT_EQ(r.discarded, 63u);
  EXPECT_EQ(r.evaluated, 1u);
  EXPECT_EQ(r.confirmed, 1u);
}

TEST(BruteForce, AccuracyOnlyFindsShuffleKey) {
  const auto& t = testutil::trained_net();
  const std::uint64_t secret = 5;
  const LockedModel l = shuffle_lock(net_store().plain, derive_key(candidate_fingerprint(secret, 4)));
  CrackConfig cfg;
  cfg.bits = 4;
  cfg.strategy = CrackStrategy::AccuracyOnly;
  const CrackReport r = brute_force(l, cfg, tinynet_oracle(t.task.test));
  ASSERT_TRUE(r.found_index);
  EXPECT_EQ(*r.found_index, secret);
  EXPECT_EQ(r.evaluated, 16u);
  EXPECT_GE(r.found_accuracy, 0.90);
}

TEST(BruteForce, KeyOutsideSpaceIsNotFound) {
  const auto& t = testutil::trained_net();
  const LockedModel l = aes_lock(net_store().plain, derive_key(candidate_fingerprint(0xfffff, 20)));
  CrackConfig cfg;
  cfg.bits = 3;
  cfg.strategy = CrackStrategy::AccuracyOnly;
  EXPECT_THROW(brute_force(l, cfg, tinynet_oracle(t.task.test)), NotFound);
  const CrackReport r = brute_force_report(l, cfg, tinynet_oracle(t.task.test));
  EXPECT_FALSE(r.found_index);
  EXPECT_EQ(r.candidates_tested, 8u);
}

TEST(BruteForce, RejectsBadConfig) {
  const LockedModel l = aes_lock(net_store().plain, Key256{});
  CrackConfig cfg;
  cfg.bits = 4;
  EXPECT_THROW(brute_force_report(l, cfg, [](const ParamStore&) { return 0.0; }), InvalidArgument);
  cfg.bits = 41;
  cfg.strategy = CrackStrategy::AccuracyOnly;
  EXPECT_THROW(brute_force_report(l, cfg, [](const ParamStore&) { return 0.0; }), InvalidArgument);
}
