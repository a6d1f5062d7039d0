#include "mlock/softlock.hpp"

#include <cmath>
#include <random>

#include "mlock/errors.hpp"

namespace mlock {

SoftLockConfig sparsity_lock_config(double p1, double p2) {
  SoftLockConfig cfg;
  cfg.authorized.prune = p1;
  cfg.unauthorized.prune = p2;
  return cfg;
}

SoftLockConfig quant_lock_config(Dtype authorized, Dtype unauthorized) {
  SoftLockConfig cfg;
  cfg.authorized.scheme = authorized;
  cfg.unauthorized.scheme = unauthorized;
  // A coarse unauthorized format leaves little room between the two
  // branches; the sparsity defaults overshoot and wreck the authorized net.
  cfg.lambda = 0.25;
  cfg.epsilon = 3.0;
  cfg.train.lr = 3e-4;
  cfg.train.epochs = 800;
  return cfg;
}

void validate(const SoftLockConfig& cfg) {
  const auto& a = cfg.authorized;
  const auto& u = cfg.unauthorized;
  const Dtype sa = a.scheme.value_or(Dtype::FP32);
  const Dtype su = u.scheme.value_or(Dtype::FP32);
  if (a.prune == u.prune && sa == su) throw InvalidArgument("authorized and unauthorized configurations coincide");
  for (double p : {a.prune, u.prune}) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("pruning fraction must lie in [0, 1]");
  }
  if (!(cfg.lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  if (!(cfg.epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
}

namespace {

TrainLog lock_train(TinyNet& net, const Dataset& data, const SoftLockConfig& cfg,
                    const std::function<void(unsigned)>& on_epoch) {
  validate(cfg);
  if (cfg.lambda == 0.0) {
    TrainConfig plain = cfg.train;
    plain.constraint = cfg.authorized;
    return train(net, data, plain, on_epoch);
  }
  ParamList<float> g2;
  auto objective = [&](const TinyNet& n, std::span<const std::size_t> batch, ParamList<float>& grad) {
    const double l1 = constrained_loss_grad(n, data, batch, cfg.authorized, grad);
    const double l2 = constrained_loss_grad(n, data, batch, cfg.unauthorized, g2);
    const double gap = cfg.epsilon - l2;
    const auto scale = static_cast<float>(-2.0 * cfg.lambda * gap);
    for (std::size_t t = 0; t < grad.size(); ++t) {
      for (std::size_t i = 0; i < grad[t].size(); ++i) grad[t][i] += scale * g2[t][i];
    }
    return l1 + cfg.lambda * gap * gap;
  };
  return train_objective(net, data, cfg.train, objective, on_epoch);
}

}  // namespace

TrainLog sparsity_lock_train(TinyNet& net, const Dataset& data, const SoftLockConfig& cfg,
                             const std::function<void(unsigned)>& on_epoch) {
  if (cfg.authorized.scheme || cfg.unauthorized.scheme) {
    throw InvalidArgument("sparsity lock takes pruning fractions only");
  }
  return lock_train(net, data, cfg, on_epoch);
}

TrainLog quant_lock_train(TinyNet& net, const Dataset& data, const SoftLockConfig& cfg,
                          const std::function<void(unsigned)>& on_epoch) {
  if (!cfg.authorized.scheme || !cfg.unauthorized.scheme) {
    throw InvalidArgument("quantization lock needs an authorized and an unauthorized scheme");
  }
  return lock_train(net, data, cfg, on_epoch);
}

LockReport lock_metrics(const TinyNet& original, const TinyNet& locked, const Dataset& test,
                        const SoftLockConfig& cfg) {
  LockReport r;
  r.acc_original = evaluate(original, test, cfg.authorized).accuracy;
  r.acc_original_unauthorized = evaluate(original, test, cfg.unauthorized).accuracy;
  r.acc_locked_authorized = evaluate(locked, test, cfg.authorized).accuracy;
  r.acc_locked_unauthorized = evaluate(locked, test, cfg.unauthorized).accuracy;
  r.delta_orig = r.acc_original - r.acc_locked_authorized;
  r.delta_lock = r.acc_locked_authorized - r.acc_locked_unauthorized;
  r.delta_base = r.acc_original - r.acc_original_unauthorized;
  return r;
}

RecoveryCurve attack_retrain(const TinyNet& locked, const Dataset& train_data, const Dataset& test,
                             const Constraint& unauthorized, unsigned epochs, double lr, std::uint64_t seed,
                             const Constraint& authorized) {
  TinyNet net = locked;
  RecoveryCurve curve;
  auto record = [&] {
    curve.unauthorized.push_back(evaluate(net, test, unauthorized).accuracy);
    curve.authorized.push_back(evaluate(net, test, authorized).accuracy);
  };
  record();
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.seed = seed;
  train_objective(
      net, train_data, cfg,
      [&](const TinyNet& n, std::span<const std::size_t> batch, ParamList<float>& g) {
        return constrained_loss_grad(n, train_data, batch, unauthorized, g);
      },
      [&](unsigned) { record(); });
  return curve;
}

std::vector<NoisePoint> attack_noise(const TinyNet& locked, const Dataset& test, const Constraint& unauthorized,
                                     const std::vector<double>& noise_params, unsigned trials, std::uint64_t seed) {
  if (trials == 0) throw InvalidArgument("noise attack needs at least one trial");
  std::vector<double> stds;
  for (const auto& t : locked.params()) {
    double mean = 0.0;
    for (float v : t) mean += v;
    mean /= static_cast<double>(t.size());
    double var = 0.0;
    for (float v : t) var += (v - mean) * (v - mean);
    stds.push_back(std::sqrt(var / static_cast<double>(t.size())));
  }
  std::vector<NoisePoint> out;
  for (std::size_t level = 0; level < noise_params.size(); ++level) {
    const double np = noise_params[level];
    if (!(np >= 0.0)) throw InvalidArgument("noise parameter must be non-negative");
    std::vector<double> accs;
    for (unsigned trial = 0; trial < trials; ++trial) {
      TinyNet noisy = locked;
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(level), trial};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t t = 0; t < noisy.params().size(); ++t) {
        for (auto& v : noisy.params()[t]) v = static_cast<float>(v + np * stds[t] * normal(rng));
      }
      accs.push_back(evaluate(noisy, test, unauthorized).accuracy);
    }
    NoisePoint p;
    p.noise_param = np;
    for (double a : accs) p.mean_accuracy += a;
    p.mean_accuracy /= static_cast<double>(accs.size());
    for (double a : accs) p.std_accuracy += (a - p.mean_accuracy) * (a - p.mean_accuracy);
    p.std_accuracy = accs.size() > 1 ? std::sqrt(p.std_accuracy / static_cast<double>(accs.size() - 1)) : 0.0;
    out.push_back(p);
  }
  return out;
}

std::vector<double> sparsity_sweep(const TinyNet& net, const Dataset& test, const std::vector<double>& levels) {
  std::vector<double> out;
  for (double p : levels) {
    Constraint c;
    c.prune = p;
    out.push_back(evaluate(net, test, c).accuracy);
  }
  return out;
}

}  // namespace mlock
