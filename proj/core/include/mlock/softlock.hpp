#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mlock/tinynet.hpp"

namespace mlock {

// Fine-tuning objective CE(authorized) + lambda * (epsilon - CE(unauthorized))^2.
struct SoftLockConfig {
  Constraint authorized;    // p1 / authorized scheme
  Constraint unauthorized;  // p2 / unauthorized scheme
  double lambda = 1.0;
  double epsilon = 5.0;     // cross-entropy target for the unauthorized branch
  TrainConfig train{25, 0.005, 64, 0, {}};
};

SoftLockConfig sparsity_lock_config(double p1, double p2);
// Gentler objective (lambda 0.25, epsilon 3) over a long, slow schedule.
SoftLockConfig quant_lock_config(Dtype authorized, Dtype unauthorized);

// Throws InvalidArgument when the two branches coincide, lambda < 0 or epsilon <= 0.
void validate(const SoftLockConfig& cfg);

// Fine-tunes `net` in place. Masks are recomputed from the current weights
// each step; both branches use straight-through gradients. With lambda == 0
// the trajectory equals train() under the authorized constraint bit for bit.
// `on_epoch` runs after every epoch with the net in its current state.
TrainLog sparsity_lock_train(TinyNet& net, const Dataset& data, const SoftLockConfig& cfg,
                             const std::function<void(unsigned epoch)>& on_epoch = {});
TrainLog quant_lock_train(TinyNet& net, const Dataset& data, const SoftLockConfig& cfg,
                          const std::function<void(unsigned epoch)>& on_epoch = {});

struct LockReport {
  double acc_original = 0.0;             // original model, authorized config
  double acc_original_unauthorized = 0.0;
  double acc_locked_authorized = 0.0;
  double acc_locked_unauthorized = 0.0;
  double delta_orig = 0.0;  // acc_original - acc_locked_authorized
  double delta_lock = 0.0;  // acc_locked_authorized - acc_locked_unauthorized
  double delta_base = 0.0;  // acc_original - acc_original_unauthorized
};

LockReport lock_metrics(const TinyNet& original, const TinyNet& locked, const Dataset& test, const SoftLockConfig& cfg);

struct RecoveryCurve {
  std::vector<double> unauthorized;  // entry 0 before retraining, entry e after epoch e
  std::vector<double> authorized;    // same steps, evaluated under the authorized config
};

// Fine-tunes a copy of `locked` under `unauthorized` with the plain
// constrained cross-entropy and records accuracy after every epoch.
RecoveryCurve attack_retrain(const TinyNet& locked, const Dataset& train_data, const Dataset& test,
                             const Constraint& unauthorized, unsigned epochs, double lr = 0.005,
                             std::uint64_t seed = 0, const Constraint& authorized = {});

struct NoisePoint {
  double noise_param = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

// Adds N(0, (noise_param * std(tensor))^2) to every tensor, then measures
// accuracy under `unauthorized`. Trial t of level i uses seed (seed, i, t).
std::vector<NoisePoint> attack_noise(const TinyNet& locked, const Dataset& test, const Constraint& unauthorized,
                                     const std::vector<double>& noise_params, unsigned trials, std::uint64_t seed = 0);

// Accuracy at each pruning level, for locating where a lock bites.
std::vector<double> sparsity_sweep(const TinyNet& net, const Dataset& test, const std::vector<double>& levels);

}  // namespace mlock
