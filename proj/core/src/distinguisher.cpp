#include "mlock/distinguisher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

#include "mlock/errors.hpp"

namespace mlock {

TestResult uniformity_chi2(const std::array<std::uint64_t, 256>& histogram) {
  std::uint64_t n = 0;
  for (auto c : histogram) n += c;
  if (n < kMinUniformityBytes) {
    throw SampleError("uniformity test needs at least " + std::to_string(kMinUniformityBytes) + " bytes, got " +
                      std::to_string(n));
  }
  const double expected = static_cast<double>(n) / 256.0;
  double chi2 = 0.0;
  for (auto c : histogram) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  return {chi2, boost::math::gamma_q(255.0 / 2.0, chi2 / 2.0)};
}

TestResult uniformity_chi2(ByteSpan bytes) {
  std::array<std::uint64_t, 256> h{};
  for (auto b : bytes) ++h[b];
  return uniformity_chi2(h);
}

double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  // The alternating series converges fast for lambda above ~0.3; below that
  // use the Jacobi theta form of the CDF.
  if (lambda < 1.0) {
    const double pi = 3.14159265358979323846;
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double t = (2 * k - 1) * pi / lambda;
      cdf += std::exp(-t * t / 8.0);
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-300) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double ks_p(double d, double n_eff) {
  const double s = std::sqrt(n_eff);
  return kolmogorov_q((s + 0.12 + 0.11 / s) * d);
}

// Finite values ascending, then every non-finite value as +inf.
std::vector<double> sorted_for_ks(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  for (auto& x : out) {
    if (!std::isfinite(x)) x = std::numeric_limits<double>::infinity();
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw SampleError("KS test needs two non-empty samples");
  const auto x = sorted_for_ks(a);
  const auto y = sorted_for_ks(b);
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_p(d, na * nb / (na + nb))};
}

DistributionStats compute_stats(std::span<const double> values, ByteSpan raw_bytes) {
  DistributionStats s;
  for (auto b : raw_bytes) ++s.byte_histogram[b];
  s.byte_count = raw_bytes.size();
  s.sample_size = values.size();

  std::vector<double> finite;
  finite.reserve(values.size());
  for (double v : values) {
    if (std::isfinite(v)) {
      finite.push_back(v);
    } else {
      ++s.nonfinite;
    }
  }
  if (!finite.empty()) {
    double sum = 0.0;
    for (double v : finite) sum += v;
    s.mean = sum / static_cast<double>(finite.size());
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : finite) {
      const double d = (v - s.mean) * (v - s.mean);
      m2 += d;
      m4 += d * d;
    }
    m2 /= static_cast<double>(finite.size());
    m4 /= static_cast<double>(finite.size());
    s.variance = m2;
    s.kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;

    std::sort(finite.begin(), finite.end());
    const std::size_t n = finite.size();
    for (std::size_t i = 1; i < kValueBins; ++i) {
      const double e = finite[std::min(n - 1, i * n / kValueBins)];
      if (s.edges.empty() || e > s.edges.back()) s.edges.push_back(e);
    }
    // The top edge would hold every finite value; drop it so the last bin
    // stays informative.
    if (!s.edges.empty() && s.edges.back() >= finite.back()) s.edges.pop_back();
  }
  s.value_histogram.assign(s.edges.size() + 1, 0);
  for (double v : finite) {
    const auto k = std::lower_bound(s.edges.begin(), s.edges.end(), v) - s.edges.begin();
    ++s.value_histogram[static_cast<std::size_t>(k)];
  }
  s.value_histogram.back() += s.nonfinite;
  std::uint64_t cum = 0;
  for (std::size_t k = 0; k < s.edges.size(); ++k) {
    cum += s.value_histogram[k];
    s.edge_cdf.push_back(static_cast<double>(cum) / static_cast<double>(s.sample_size));
  }
  return s;
}

DistributionStats compute_stats(const ParamStore& store) {
  const auto f = store.all_values();
  const std::vector<double> v(f.begin(), f.end());
  const Bytes raw = flatten(store);
  return compute_stats(v, raw);
}

DistributionStats stats_from_pretransform(const PreTransform& pre, std::size_t samples, std::uint64_t seed) {
  std::vector<double> values;
  const unsigned bits = std::visit([](const auto& p) { return p.bits(); }, pre);
  const Dtype dtype = std::visit([](const auto& p) { return p.dtype; }, pre);
  const bool enumerate = bits <= 16;
  const std::uint64_t count = enumerate ? (std::uint64_t{1} << bits) : samples;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> draw(0, (std::uint64_t{1} << bits) - 1);
  values.reserve(static_cast<std::size_t>(count));

  std::vector<std::uint32_t> inverse;
  if (const auto* lut = std::get_if<EmpiricalLut>(&pre); lut != nullptr && enumerate) inverse = lut->dense_inverse();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t u = enumerate ? i : draw(rng);
    if (const auto* lut = std::get_if<EmpiricalLut>(&pre)) {
      const std::uint32_t code = enumerate ? inverse[u] : lut->decode(u);
      values.push_back(decode_value(code, dtype));
    } else {
      const auto& g = std::get<GaussianPretransform>(pre);
      const double p = (static_cast<double>(u) + 0.5) / std::ldexp(1.0, static_cast<int>(bits));
      values.push_back(decode_value(encode_value(g.mean + g.stddev * gaussian_quantile(p), dtype), dtype));
    }
  }
  return compute_stats(values);
}

std::string_view verdict_name(Verdict v) noexcept {
  return v == Verdict::Plausible ? "Plausible" : "Implausible";
}

DistinguishReport distinguish_report(const ParamStore& candidate, const DistributionStats& reference, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (reference.sample_size == 0) throw SampleError("reference statistics are empty");
  DistinguishReport r;

  std::array<std::uint64_t, 256> hist{};
  std::uint64_t nbytes = 0;
  for (const auto& t : candidate.tensors()) {
    for (auto b : t.data) ++hist[b];
    nbytes += t.data.size();
  }
  if (nbytes >= kMinUniformityBytes) {
    r.uniformity_tested = true;
    r.uniformity = uniformity_chi2(hist);
  }

  // Binned KS: compare CDFs at the reference edges only.
  std::vector<std::uint64_t> bins(reference.edges.size() + 1, 0);
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    for (float f : candidate.values(i)) {
      ++n;
      const double v = f;
      if (!std::isfinite(v)) {
        ++bins.back();
        continue;
      }
      const auto k = std::lower_bound(reference.edges.begin(), reference.edges.end(), v) - reference.edges.begin();
      ++bins[static_cast<std::size_t>(k)];
    }
  }
  if (n == 0) throw SampleError("candidate store is empty");
  double d = 0.0;
  std::uint64_t cum = 0;
  for (std::size_t k = 0; k < reference.edges.size(); ++k) {
    cum += bins[k];
    d = std::max(d, std::abs(static_cast<double>(cum) / static_cast<double>(n) - reference.edge_cdf[k]));
  }
  const double nr = static_cast<double>(reference.sample_size);
  const double nc = static_cast<double>(n);
  r.value_ks = {d, ks_p(d, nc * nr / (nc + nr))};

  const bool looks_encrypted = r.uniformity_tested && r.uniformity.p_value >= alpha;
  const bool wrong_shape = r.value_ks.p_value < alpha;
  r.verdict = looks_encrypted || wrong_shape ? Verdict::Implausible : Verdict::Plausible;
  return r;
}

Verdict distinguish(const ParamStore& candidate, const DistributionStats& reference, double alpha) {
  return distinguish_report(candidate, reference, alpha).verdict;
}

}  // namespace mlock
