#include <gtest/gtest.h>

#include "helpers.hpp"
#include "mlock/errors.hpp"
#include "mlock/softlock.hpp"

using namespace mlock;

TEST(SoftLockConfig, Validation) {
  EXPECT_THROW(validate(sparsity_lock_config(0.3, 0.3)), InvalidArgument);
  EXPECT_THROW(validate(quant_lock_config(Dtype::MiniFloat8, Dtype::MiniFloat8)), InvalidArgument);
  EXPECT_THROW(validate(sparsity_lock_config(0.0, 1.5)), InvalidArgument);
  SoftLockConfig neg = sparsity_lock_config(0.0, 0.5);
  neg.lambda = -1;
  EXPECT_THROW(validate(neg), InvalidArgument);
  EXPECT_NO_THROW(validate(sparsity_lock_config(0.0, 0.5)));
}

TEST(SoftLockConfig, PaperDefaultsForSparsity) {
  const SoftLockConfig c = sparsity_lock_config(0.0, 0.5);
  EXPECT_EQ(c.lambda, 1.0);
  EXPECT_EQ(c.epsilon, 5.0);
}

TEST(SoftLock, ModeMismatchRejected) {
  const auto& t = testutil::trained_net();
  TinyNet net = t.net;
  EXPECT_THROW(sparsity_lock_train(net, t.task.train, quant_lock_config(Dtype::FP32, Dtype::MiniFloat8)),
               InvalidArgument);
  EXPECT_THROW(quant_lock_train(net, t.task.train, sparsity_lock_config(0.0, 0.5)), InvalidArgument);
}

TEST(SoftLock, ZeroLambdaIsPlainFineTuning) {
  const auto& t = testutil::trained_net();
  SoftLockConfig cfg = sparsity_lock_config(0.0, 0.5);
  cfg.lambda = 0.0;
  cfg.train.epochs = 2;
  TinyNet locked = t.net;
  sparsity_lock_train(locked, t.task.train, cfg);
  TinyNet plain = t.net;
  TrainConfig tc = cfg.train;
  tc.constraint = cfg.authorized;
  train(plain, t.task.train, tc);
  EXPECT_EQ(locked, plain);
  EXPECT_GE(evaluate(locked, t.task.test).accuracy, evaluate(t.net, t.task.test).accuracy - 0.01);
}

TEST(LockMetrics, IdenticalNetsAndArithmetic) {
  const auto& t = testutil::trained_net();
  const SoftLockConfig cfg = sparsity_lock_config(0.0, 0.05);
  const LockReport r = lock_metrics(t.net, t.net, t.task.test, cfg);
  EXPECT_EQ(r.delta_orig, 0.0);
  EXPECT_NEAR(r.delta_lock, r.delta_base, 1e-12);
  EXPECT_LE(r.delta_base, 0.02);
  EXPECT_DOUBLE_EQ(r.delta_lock, r.acc_locked_authorized - r.acc_locked_unauthorized);
}

TEST(SoftLock, SparsityLockAtHalf) {
  const auto& t = testutil::trained_net();
  const SoftLockConfig cfg = sparsity_lock_config(0.0, 0.5);
  TinyNet locked = t.net;
  sparsity_lock_train(locked, t.task.train, cfg);
  const LockReport r = lock_metrics(t.net, locked, t.task.test, cfg);
  EXPECT_LE(r.delta_orig, 0.02);
  EXPECT_GE(r.delta_lock, 0.30);
  EXPECT_GT(r.delta_lock, r.delta_base + 0.25);
}

TEST(Attack, ZeroEpochCurveStartsAtLockedAccuracy) {
  const auto& t = testutil::trained_net();
  Constraint c;
  c.prune = 0.5;
  const RecoveryCurve rc = attack_retrain(t.net, t.task.train, t.task.test, c, 0);
  ASSERT_EQ(rc.unauthorized.size(), 1u);
  EXPECT_EQ(rc.unauthorized[0], evaluate(t.net, t.task.test, c).accuracy);
  EXPECT_EQ(rc.authorized[0], evaluate(t.net, t.task.test).accuracy);
}

TEST(Attack, NoiseLevels) {
  const auto& t = testutil::trained_net();
  const auto pts = attack_noise(t.net, t.task.test, Constraint{}, {0.0, 10.0}, 5, 1);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0].mean_accuracy, evaluate(t.net, t.task.test).accuracy);
  EXPECT_NEAR(pts[0].std_accuracy, 0.0, 1e-12);
  EXPECT_LT(pts[1].mean_accuracy, 0.45);
  EXPECT_THROW(attack_noise(t.net, t.task.test, Constraint{}, {0.1}, 0), InvalidArgument);
}

TEST(Sweep, MonotoneExtremes) {
  const auto& t = testutil::trained_net();
  const auto acc = sparsity_sweep(t.net, t.task.test, {0.0, 1.0});
  EXPECT_EQ(acc[0], evaluate(t.net, t.task.test).accuracy);
  EXPECT_LT(acc[1], 0.5);
}
