// Acceptance suite. Prints one PASS/FAIL line per criterion; with a numeric
// argument only that criterion runs. Exit status is the number of failures.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mlock/cracker.hpp"
#include "mlock/distinguisher.hpp"
#include "mlock/errors.hpp"
#include "mlock/fingerprint.hpp"
#include "mlock/softlock.hpp"
#include "mlock/tinynet.hpp"
#include "mlock/transform.hpp"

using namespace mlock;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr std::array<TransformKind, 3> kKinds = {TransformKind::AES, TransformKind::Shuffle,
                                                 TransformKind::PretransformedAES};

Key256 random_key(std::mt19937_64& rng) {
  Key256 k{};
  for (auto& b : k) b = static_cast<std::uint8_t>(rng());
  return k;
}

ParamTensor gaussian_tensor(std::string name, Dtype d, std::size_t n, std::mt19937_64& rng, double sd = 0.05) {
  std::normal_distribution<double> normal(0.0, sd);
  ParamTensor t;
  t.name = std::move(name);
  t.shape = {n};
  t.dtype = d;
  t.data.assign(n * byte_width(d), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = d == Dtype::INT8 ? std::round(normal(rng) / sd * 30.0) : normal(rng);
    t.set_code(i, encode_value(std::clamp(v, -127.0, 127.0), d));
  }
  return t;
}

// Shared trained model on the blob task: net seed 1, train seed 2, data seed 0.
struct Reference {
  BlobTask task = make_blobs({});
  TinyNet net{kDefaultWidths, 1};
  double accuracy = 0.0;

  Reference() {
    TrainConfig cfg;
    cfg.seed = 2;
    train(net, task.train, cfg);
    accuracy = evaluate(net, task.test).accuracy;
  }
};

const Reference& reference() {
  static const Reference r;
  return r;
}

std::optional<PreTransform> pretransform_for(TransformKind kind, const ParamStore& s) {
  if (kind != TransformKind::PretransformedAES) return std::nullopt;
  return PreTransform{build_empirical_pretransform(s, bit_width(uniform_dtype(s)))};
}

// ---------------------------------------------------------------------------

Outcome round_trip() {
  const auto t0 = Clock::now();
  constexpr std::array<Dtype, 5> dtypes = {Dtype::FP32, Dtype::FP16, Dtype::MiniFloat16, Dtype::MiniFloat8,
                                           Dtype::INT8};
  std::mt19937_64 rng(101);
  int ok = 0, total = 0;
  for (TransformKind kind : kKinds) {
    for (int i = 0; i < 20; ++i) {
      ParamStore s;
      std::uniform_int_distribution<std::size_t> len(1, 5000);
      const int tensors = 1 + i % 4;
      for (int t = 0; t < tensors; ++t) {
        // pt-AES needs one dtype per store; the others get a mix.
        const Dtype d = kind == TransformKind::PretransformedAES ? dtypes[i % 5] : dtypes[(i + t) % 5];
        const std::string name = "t" + std::to_string(t);
        s.add(gaussian_tensor(name, d, len(rng), rng));
        if (d == Dtype::INT8) s.meta()["int8.scale:" + name] = "0.01";
      }
      s.meta()["arch"] = "random";
      const Key256 k = random_key(rng);
      const LockedModel l = lock(s, k, kind, pretransform_for(kind, s));
      const LockedModel back = deserialize_locked(serialize_locked(l));
      ok += serialize_store(unlock(back, k)) == serialize_store(s);
      ++total;
    }
  }
  const double t = seconds_since(t0);
  return {ok == total && t < 10.0, fmt("%d/%d byte-exact round trips in %.2f s (limit 10 s)", ok, total, t)};
}

Outcome destruction() {
  const auto t0 = Clock::now();
  const Reference& ref = reference();
  const ParamStore store = ref.net.to_store();
  std::mt19937_64 rng(202);
  bool pass = ref.accuracy >= 0.90;
  std::string detail = fmt("trained %.3f;", ref.accuracy);
  for (TransformKind kind : kKinds) {
    const Key256 k = random_key(rng);
    const LockedModel l = lock(store, k, kind, pretransform_for(kind, store));
    double sum = 0.0, lo = 1.0, hi = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double a = evaluate(TinyNet::from_store(unlock(l, random_key(rng))), ref.task.test).accuracy;
      sum += a;
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
    const double mean = sum / 20;
    pass = pass && std::fabs(mean - 0.25) <= 0.05;
    detail += fmt(" %s wrong-key mean %.3f (range %.3f..%.3f);", std::string(kind_name(kind)).c_str(), mean, lo, hi);
  }
  const double t = seconds_since(t0);
  pass = pass && t < 120.0;
  return {pass, detail + fmt(" %.1f s", t)};
}

Outcome indistinguishability() {
  const auto t0 = Clock::now();
  constexpr std::size_t kParams = 1000000;
  constexpr int kWrongKeys = 200;
  constexpr double kAlpha = kDefaultAlpha;
  std::mt19937_64 rng(303);
  ParamStore store;
  store.add(gaussian_tensor("w", Dtype::FP32, kParams, rng));
  const DistributionStats reference_stats = compute_stats(store);
  const Key256 k = random_key(rng);

  struct Row {
    const char* label;
    TransformKind kind;
    std::optional<PreTransform> pre;
  };
  const std::vector<Row> rows = {
      {"aes", TransformKind::AES, std::nullopt},
      {"shuffle", TransformKind::Shuffle, std::nullopt},
      {"pt-aes/empirical", TransformKind::PretransformedAES, build_empirical_pretransform(store, 32)},
      {"pt-aes/gaussian", TransformKind::PretransformedAES, fit_gaussian_pretransform(store)},
  };
  bool pass = true;
  std::string detail;
  for (const Row& row : rows) {
    const LockedModel l = lock(store, k, row.kind, row.pre);
    int implausible = 0;
    for (int i = 0; i < kWrongKeys; ++i) {
      implausible += distinguish(unlock(l, random_key(rng)), reference_stats, kAlpha) == Verdict::Implausible;
    }
    const double rate = static_cast<double>(implausible) / kWrongKeys;
    const std::string label = row.label;
    if (label == "aes") pass = pass && rate >= 0.99;
    else if (label != "pt-aes/gaussian") pass = pass && rate <= kAlpha + 0.02;
    detail += fmt(" %s %.3f%s;", row.label, rate, label == "pt-aes/gaussian" ? " (report only)" : "");
  }
  const double t = seconds_since(t0);
  pass = pass && t < 300.0;
  return {pass, fmt("Implausible rate over %d wrong keys, n=%zu:", kWrongKeys, kParams) + detail + fmt(" %.1f s", t)};
}

Outcome key_stretching() {
  const auto t0 = Clock::now();
  const Reference& ref = reference();
  const ParamStore store = ref.net.to_store();
  const DistributionStats stats = compute_stats(store);
  const AccuracyOracle oracle = tinynet_oracle(ref.task.test);
  const std::uint64_t planted = 0x9c3;
  const Key256 key = derive_key(candidate_fingerprint(planted, 12));
  bool pass = true;
  std::string detail;
  for (TransformKind kind : kKinds) {
    CrackConfig cfg;
    cfg.bits = 12;
    const CrackReport r = brute_force_report(lock(store, key, kind, pretransform_for(kind, store)), cfg, oracle, &stats);
    const double share = r.eval_time_s / r.wall_time_s;
    const bool found = r.found_index && *r.found_index == planted;
    pass = pass && found && (kind == TransformKind::AES ? share <= 0.10 : share >= 0.50);
    detail += fmt(" %s %s eval share %.3f of %.2f s;", std::string(kind_name(kind)).c_str(),
                  found ? "recovered" : "MISSED", share, r.wall_time_s);
  }
  const double t = seconds_since(t0);
  pass = pass && t < 600.0;
  return {pass, detail.substr(1) + fmt(" total %.1f s", t)};
}

Outcome cost_scaling_ratio() {
  const Reference& ref = reference();
  const ParamStore store = ref.net.to_store();
  const DistributionStats stats = compute_stats(store);
  const AccuracyOracle oracle = tinynet_oracle(ref.task.test);
  const Key256 key = derive_key(candidate_fingerprint(0xfffff, 20));  // outside every searched space
  bool pass = true;
  std::string detail;
  for (TransformKind kind : kKinds) {
    const LockedModel l = lock(store, key, kind, pretransform_for(kind, store));
    CrackConfig cfg;
    // Warm-up, then the median of three timings per width.
    cost_scaling(l, {8}, cfg, oracle, &stats);
    std::vector<double> t;
    for (unsigned b = 8; b <= 11; ++b) {
      std::vector<double> runs;
      for (int rep = 0; rep < 3; ++rep) runs.push_back(cost_scaling(l, {b}, cfg, oracle, &stats)[0].wall_time_s);
      std::sort(runs.begin(), runs.end());
      t.push_back(runs[1]);
    }
    detail += fmt(" %s", std::string(kind_name(kind)).c_str());
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      const double ratio = t[i + 1] / t[i];
      pass = pass && ratio >= 1.6 && ratio <= 2.4;
      detail += fmt(" %u->%u %.2f", static_cast<unsigned>(8 + i), static_cast<unsigned>(9 + i), ratio);
    }
    detail += ";";
  }
  return {pass, "time ratios" + detail};
}

Outcome sparsity_lock() {
  const auto t0 = Clock::now();
  const Reference& ref = reference();
  const SoftLockConfig cfg = sparsity_lock_config(0.0, 0.5);
  TinyNet locked = ref.net;
  sparsity_lock_train(locked, ref.task.train, cfg);
  const LockReport r = lock_metrics(ref.net, locked, ref.task.test, cfg);
  const double t = seconds_since(t0);
  const bool pass = r.delta_orig <= 0.02 && r.delta_lock >= 0.30 && r.delta_base <= 0.05 && t < 300.0;
  return {pass, fmt("p2=0.5: delta_orig %.3f (<=0.02) delta_lock %.3f (>=0.30) delta_base %.3f (<=0.05); "
                    "locked auth %.3f unauth %.3f; %.1f s",
                    r.delta_orig, r.delta_lock, r.delta_base, r.acc_locked_authorized, r.acc_locked_unauthorized, t)};
}

Outcome quant_lock() {
  const Reference& ref = reference();
  const SoftLockConfig cfg = quant_lock_config(Dtype::FP32, Dtype::MiniFloat8);
  TinyNet locked = ref.net;
  quant_lock_train(locked, ref.task.train, cfg);
  const LockReport r = lock_metrics(ref.net, locked, ref.task.test, cfg);
  const bool pass = std::fabs(r.acc_locked_unauthorized - 0.25) <= 0.10 && r.delta_orig <= 0.02;

  // Int8 -> MiniFloat8: reported only.
  const SoftLockConfig cfg8 = quant_lock_config(Dtype::INT8, Dtype::MiniFloat8);
  TinyNet locked8 = ref.net;
  quant_lock_train(locked8, ref.task.train, cfg8);
  const LockReport r8 = lock_metrics(ref.net, locked8, ref.task.test, cfg8);
  return {pass, fmt("fp32->minifloat8: auth %.3f (drop %.3f <=0.02) unauth %.3f (chance 0.25 +-0.10); "
                    "int8->minifloat8 (report only): auth %.3f unauth %.3f",
                    r.acc_locked_authorized, r.delta_orig, r.acc_locked_unauthorized,
                    r8.acc_locked_authorized, r8.acc_locked_unauthorized)};
}

Outcome retrain_attack() {
  const Reference& ref = reference();
  constexpr unsigned kEpochs = 10;
  Constraint pruned;
  pruned.prune = 0.5;
  const double baseline = evaluate(ref.net, ref.task.test, pruned).accuracy;

  auto lock_and_attack = [&](double p2) {
    TinyNet locked = ref.net;
    sparsity_lock_train(locked, ref.task.train, sparsity_lock_config(0.0, p2));
    return attack_retrain(locked, ref.task.train, ref.task.test, pruned, kEpochs, 0.005, 0, Constraint{});
  };
  const RecoveryCurve strong = lock_and_attack(0.5);
  int recovered_at = -1;
  for (std::size_t e = 0; e < strong.unauthorized.size(); ++e) {
    if (strong.unauthorized[e] >= baseline - 0.05) {
      recovered_at = static_cast<int>(e);
      break;
    }
  }
  const RecoveryCurve weak = lock_and_attack(0.05);
  const double weak_final = weak.unauthorized.back();
  const bool recovers = recovered_at >= 0;
  const bool resists = weak_final <= baseline - 0.10;
  return {recovers && resists,
          fmt("pruned baseline %.3f; p2=0.5 lock starts %.3f, within 5pp at epoch %d; "
              "p2=0.05 lock starts %.3f (authorized %.3f), after %u epochs %.3f (needs <= %.3f)",
              baseline, strong.unauthorized[0], recovered_at, weak.unauthorized[0], weak.authorized[0], kEpochs,
              weak_final, baseline - 0.10)};
}

Outcome fuzzy_extractor() {
  constexpr unsigned kRep = 9;
  constexpr std::size_t kBits = kFuzzyKeyBits * kRep;
  const SyntheticPuf puf(909, 0.05);
  const BitVector ref = puf.ground_truth(kBits);
  const FuzzyEnrollment e = fuzzy_gen(ref, kRep);
  auto recovers = [&](const BitVector& bits) {
    try {
      return fuzzy_rep(bits, e.helper) == e.key;
    } catch (const RecoveryFailed&) {
      return false;
    }
  };
  int noisy_ok = 0;
  for (int trial = 0; trial < 1000; ++trial) noisy_ok += recovers(puf.read(kBits, 1 + trial));

  std::mt19937_64 rng(910);
  int bounded_ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    BitVector bits = ref;
    for (std::size_t blk = 0; blk < kFuzzyKeyBits; ++blk) {
      std::vector<std::size_t> pos(kRep);
      std::iota(pos.begin(), pos.end(), blk * kRep);
      std::shuffle(pos.begin(), pos.end(), rng);
      const std::size_t flips = rng() % 5;  // 0..4
      for (std::size_t j = 0; j < flips; ++j) bits[pos[j]] ^= 1u;
    }
    bounded_ok += recovers(bits);
  }
  return {noisy_ok >= 990 && bounded_ok == 1000,
          fmt("r=9, 5%% bit error: %d/1000 (>=990; binomial expectation 991.5); <=4 flips per block: %d/1000",
              noisy_ok, bounded_ok)};
}

Outcome finite_precision() {
  const FinitePrecisionConfig cfg;
  const Fingerprint first = finite_precision_fingerprint(cfg);
  int same = 0;
  for (int i = 0; i < 10; ++i) same += finite_precision_fingerprint(cfg).symbols == first.symbols;
  FinitePrecisionConfig rev = cfg;
  rev.order = AccumulationOrder::Reversed;
  const Fingerprint reversed = finite_precision_fingerprint(rev);
  const bool pass = same == 10 && first.symbols.size() == 64 && reversed.symbols != first.symbols;
  return {pass, fmt("%d/10 identical (%.12s...), reversed order %.12s...", same, first.symbols.c_str(),
                    reversed.symbols.c_str())};
}

Outcome emulation_bench() {
  const SparseBenchResult r = bench_sparse_vs_emulated(2048, 0.995, 16, 7, 0);
  const double speedup = r.emulated.latency_s / r.real.latency_s;
  return {speedup >= 1.5 && r.relative_error <= 1e-5,
          fmt("dim 2048 sparsity 0.995: csr %.3g s, emulated %.3g s, speedup %.1fx (>=1.5); rel error %.2g (<=1e-5)",
              r.real.latency_s, r.emulated.latency_s, speedup, r.relative_error)};
}

Outcome gradient_check() {
  const BlobTask task = make_blobs({});
  constexpr double kH = 1e-6;
  constexpr double kFloor = 1e-7;  // relative error denominator floor for vanishing gradients
  double worst = 0.0;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TinyNet net(kDefaultWidths, seed);
    ParamList<double> p(net.params().size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i].assign(net.params()[i].begin(), net.params()[i].end());
    std::vector<std::size_t> batch(64);
    std::iota(batch.begin(), batch.end(), seed * 64);
    ParamList<double> g;
    loss_and_grad<double>(net.widths(), p, task.train, batch, &g);
    std::mt19937_64 rng(seed + 1000);
    for (int k = 0; k < 100; ++k) {
      const std::size_t ti = rng() % p.size();
      const std::size_t i = rng() % p[ti].size();
      const double orig = p[ti][i];
      p[ti][i] = orig + kH;
      const double up = loss_and_grad<double>(net.widths(), p, task.train, batch, nullptr);
      p[ti][i] = orig - kH;
      const double down = loss_and_grad<double>(net.widths(), p, task.train, batch, nullptr);
      p[ti][i] = orig;
      const double fd = (up - down) / (2 * kH);
      const double rel = std::fabs(g[ti][i] - fd) / std::max({std::fabs(g[ti][i]), std::fabs(fd), kFloor});
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  return {worst <= 1e-4, fmt("%d coordinates over 10 seeds, worst relative error %.2e (<=1e-4)", checked, worst)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"round_trip", round_trip},
      {"destruction", destruction},
      {"indistinguishability", indistinguishability},
      {"key_stretching", key_stretching},
      {"cost_scaling", cost_scaling_ratio},
      {"sparsity_lock", sparsity_lock},
      {"quant_lock", quant_lock},
      {"retrain_attack", retrain_attack},
      {"fuzzy_extractor", fuzzy_extractor},
      {"finite_precision", finite_precision},
      {"emulation_bench", emulation_bench},
      {"gradient_check", gradient_check},
  };
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(all.size())) {
      std::fprintf(stderr, "usage: %s [criterion 1..%zu]...\n", argv[0], all.size());
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(n - 1));
  }
  if (selected.empty()) {
    for (std::size_t i = 0; i < all.size(); ++i) selected.push_back(i);
  }
  int failures = 0;
  for (std::size_t i : selected) {
    Outcome o;
    try {
      o = all[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, all[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
