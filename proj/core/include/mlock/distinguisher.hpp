#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mlock/crypto.hpp"
#include "mlock/param_store.hpp"
#include "mlock/pretransform.hpp"

namespace mlock {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline constexpr std::size_t kMinUniformityBytes = 256 * 20;
inline constexpr std::size_t kValueBins = 64;
inline constexpr double kDefaultAlpha = 0.01;

// Pearson chi-square of the byte histogram against the uniform law (255 dof).
// Throws SampleError below kMinUniformityBytes.
TestResult uniformity_chi2(ByteSpan bytes);
TestResult uniformity_chi2(const std::array<std::uint64_t, 256>& histogram);

// Two-sample Kolmogorov-Smirnov with the asymptotic p-value. Non-finite
// entries sort above every finite value. Throws SampleError on empty input.
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b);

// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_q(double lambda);

struct DistributionStats {
  std::array<std::uint64_t, 256> byte_histogram{};
  // Up to 64 equal-probability bins: edges are the interior upper bounds,
  // edge_cdf the fraction of finite-or-not samples <= each edge.
  std::vector<double> edges;
  std::vector<double> edge_cdf;
  std::vector<std::uint64_t> value_histogram;  // edges.size() + 1 bins
  double mean = 0.0;
  double variance = 0.0;
  double kurtosis = 0.0;  // excess kurtosis
  std::uint64_t sample_size = 0;
  std::uint64_t byte_count = 0;
  std::uint64_t nonfinite = 0;
};

DistributionStats compute_stats(const ParamStore& store);
DistributionStats compute_stats(std::span<const double> values, ByteSpan raw_bytes = {});

// Reference statistics an attacker can rebuild from a pre-transform table
// alone: the distribution decoded from uniform codes. No byte histogram.
DistributionStats stats_from_pretransform(const PreTransform& pre, std::size_t samples = 1u << 16,
                                          std::uint64_t seed = 0);

enum class Verdict { Plausible, Implausible };

std::string_view verdict_name(Verdict v) noexcept;

struct DistinguishReport {
  Verdict verdict = Verdict::Plausible;
  bool uniformity_tested = false;
  TestResult uniformity;  // p >= alpha means "bytes look like ciphertext"
  TestResult value_ks;    // binned KS against the reference edges
};

// Implausible when the candidate's bytes pass as uniform or its values fail
// the binned KS test against `reference`, both at level alpha.
DistinguishReport distinguish_report(const ParamStore& candidate, const DistributionStats& reference,
                                     double alpha = kDefaultAlpha);
Verdict distinguish(const ParamStore& candidate, const DistributionStats& reference, double alpha = kDefaultAlpha);

}  // namespace mlock
