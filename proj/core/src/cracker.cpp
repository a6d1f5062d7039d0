#include "mlock/cracker.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <thread>

#include "mlock/errors.hpp"

namespace mlock {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct WorkerResult {
  CrackReport partial;
  std::optional<std::uint64_t> winner;
  double winner_acc = -1.0;
};

bool better(double acc, std::uint64_t idx, double best_acc, std::uint64_t best_idx) {
  return acc > best_acc || (acc == best_acc && idx < best_idx);
}

}  // namespace

std::string_view strategy_name(CrackStrategy s) noexcept {
  return s == CrackStrategy::StatFirst ? "stat" : "acc";
}

AccuracyOracle tinynet_oracle(const Dataset& test) {
  return [&test](const ParamStore& store) {
    const TinyNet net = TinyNet::from_store(store);
    return accuracy(net.widths(), net.params(), test);
  };
}

Fingerprint candidate_fingerprint(std::uint64_t index, unsigned bits) {
  const unsigned width = std::max(5u, (bits + 3) / 4);
  std::string hex(width, '0');
  static constexpr char kDigits[] = "0123456789abcdef";
  for (unsigned i = 0; i < width; ++i) {
    const unsigned shift = 4 * (width - 1 - i);
    hex[i] = shift < 64 ? kDigits[(index >> shift) & 0xf] : '0';
  }
  return Fingerprint{FingerprintMethod::Clock, hex, bits};
}

CrackReport brute_force_report(const LockedModel& locked, const CrackConfig& cfg, const AccuracyOracle& oracle,
                               const DistributionStats* reference) {
  if (cfg.bits > 40) throw InvalidArgument("key space above 40 bits is not enumerable");
  if (cfg.strategy == CrackStrategy::StatFirst && reference == nullptr) {
    throw InvalidArgument("StatFirst needs reference statistics");
  }
  if (cfg.classes == 0) throw InvalidArgument("class count must be positive");
  const std::uint64_t total = std::uint64_t{1} << cfg.bits;
  const double threshold = 1.0 / cfg.classes + 0.10;
  const unsigned workers = std::max(1u, cfg.workers);
  std::atomic<std::uint64_t> next{0};
  std::vector<WorkerResult> results(workers);

  auto work = [&](WorkerResult& res) {
    CrackReport& r = res.partial;
    for (;;) {
      const std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= total) break;
      ++r.candidates_tested;
      auto t0 = Clock::now();
      const ParamStore candidate = unlock(locked, derive_key(candidate_fingerprint(i, cfg.bits)));
      r.detransform_time_s += seconds_since(t0);

      if (cfg.strategy == CrackStrategy::StatFirst) {
        t0 = Clock::now();
        const Verdict v = distinguish(candidate, *reference, cfg.alpha);
        r.stat_time_s += seconds_since(t0);
        if (v == Verdict::Implausible) {
          ++r.discarded;
          continue;
        }
      }

      t0 = Clock::now();
      const double acc = oracle(candidate);
      r.eval_time_s += seconds_since(t0);
      ++r.evaluated;
      if (better(acc, i, r.best_accuracy, r.best_index) || r.best_accuracy < 0.0) {
        r.best_accuracy = acc;
        r.best_index = i;
      }
      if (acc > threshold) {
        ++r.confirmed;
        if (!res.winner || better(acc, i, res.winner_acc, *res.winner)) {
          res.winner = i;
          res.winner_acc = acc;
        }
      }
    }
  };

  const auto start = Clock::now();
  if (workers == 1) {
    work(results[0]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, std::ref(results[w]));
    for (auto& t : pool) t.join();
  }

  CrackReport out;
  out.wall_time_s = seconds_since(start);
  std::optional<std::uint64_t> winner;
  double winner_acc = -1.0;
  for (const auto& res : results) {
    const auto& p = res.partial;
    out.candidates_tested += p.candidates_tested;
    out.discarded += p.discarded;
    out.evaluated += p.evaluated;
    out.confirmed += p.confirmed;
    out.detransform_time_s += p.detransform_time_s;
    out.stat_time_s += p.stat_time_s;
    out.eval_time_s += p.eval_time_s;
    if (p.best_accuracy >= 0.0 && (out.best_accuracy < 0.0 || better(p.best_accuracy, p.best_index,
                                                                     out.best_accuracy, out.best_index))) {
      out.best_accuracy = p.best_accuracy;
      out.best_index = p.best_index;
    }
    if (res.winner && (!winner || better(res.winner_acc, *res.winner, winner_acc, *winner))) {
      winner = res.winner;
      winner_acc = res.winner_acc;
    }
  }
  if (winner) {
    out.found_index = winner;
    out.found = candidate_fingerprint(*winner, cfg.bits);
    out.found_accuracy = winner_acc;
  }
  return out;
}

CrackReport brute_force(const LockedModel& locked, const CrackConfig& cfg, const AccuracyOracle& oracle,
                        const DistributionStats* reference) {
  CrackReport r = brute_force_report(locked, cfg, oracle, reference);
  if (!r.found_index) {
    char buf[160];
    if (r.best_accuracy >= 0.0) {
      std::snprintf(buf, sizeof(buf), "no candidate beat chance + 10pp; best was %s at accuracy %.4f",
                    candidate_fingerprint(r.best_index, cfg.bits).symbols.c_str(), r.best_accuracy);
    } else {
      std::snprintf(buf, sizeof(buf), "no candidate survived the statistical filter (%llu tested)",
                    static_cast<unsigned long long>(r.candidates_tested));
    }
    throw NotFound(buf);
  }
  return r;
}

std::vector<ScalingPoint> cost_scaling(const LockedModel& locked, const std::vector<unsigned>& bits,
                                       const CrackConfig& cfg, const AccuracyOracle& oracle,
                                       const DistributionStats* reference) {
  std::vector<ScalingPoint> out;
  for (unsigned b : bits) {
    CrackConfig c = cfg;
    c.bits = b;
    const CrackReport r = brute_force_report(locked, c, oracle, reference);
    out.push_back({b, r.wall_time_s, r.found_index.has_value()});
  }
  return out;
}

}  // namespace mlock
