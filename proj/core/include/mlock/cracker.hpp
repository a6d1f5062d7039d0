#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mlock/distinguisher.hpp"
#include "mlock/fingerprint.hpp"
#include "mlock/tinynet.hpp"
#include "mlock/transform.hpp"

namespace mlock {

enum class CrackStrategy { StatFirst, AccuracyOnly };

std::string_view strategy_name(CrackStrategy s) noexcept;  // "stat", "acc"

// Accuracy of a candidate parameter set on the attacker's test data.
using AccuracyOracle = std::function<double(const ParamStore&)>;

AccuracyOracle tinynet_oracle(const Dataset& test);

struct CrackConfig {
  unsigned bits = 12;
  CrackStrategy strategy = CrackStrategy::StatFirst;
  double alpha = kDefaultAlpha;
  unsigned workers = 1;
  unsigned classes = 4;  // chance level is 1 / classes
};

// Candidate i of a b-bit space: zero-padded lowercase hex of i, at least five
// symbols, in the clock-fingerprint namespace.
Fingerprint candidate_fingerprint(std::uint64_t index, unsigned bits);

struct CrackReport {
  std::optional<std::uint64_t> found_index;
  std::optional<Fingerprint> found;
  double found_accuracy = 0.0;
  std::uint64_t best_index = 0;  // highest accuracy seen, confirmed or not
  double best_accuracy = -1.0;
  std::uint64_t candidates_tested = 0;
  std::uint64_t discarded = 0;   // Implausible under StatFirst
  std::uint64_t evaluated = 0;
  std::uint64_t confirmed = 0;   // accuracy above 1/k + 0.10
  double wall_time_s = 0.0;
  // Sums over all candidates and workers.
  double detransform_time_s = 0.0;
  double stat_time_s = 0.0;
  double eval_time_s = 0.0;
};

// Enumerates all 2^bits candidates. Among confirmed candidates the highest
// accuracy wins, ties going to the lowest index. StatFirst needs `reference`.
// Throws NotFound (naming the best candidate) when nothing is confirmed.
CrackReport brute_force(const LockedModel& locked, const CrackConfig& cfg, const AccuracyOracle& oracle,
                        const DistributionStats* reference = nullptr);

// Same search, returning the report even when nothing was confirmed.
CrackReport brute_force_report(const LockedModel& locked, const CrackConfig& cfg, const AccuracyOracle& oracle,
                               const DistributionStats* reference = nullptr);

struct ScalingPoint {
  unsigned bits = 0;
  double wall_time_s = 0.0;
  bool found = false;
};

std::vector<ScalingPoint> cost_scaling(const LockedModel& locked, const std::vector<unsigned>& bits,
                                       const CrackConfig& cfg, const AccuracyOracle& oracle,
                                       const DistributionStats* reference = nullptr);

}  // namespace mlock
