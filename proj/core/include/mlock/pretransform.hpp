#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "mlock/dtype.hpp"
#include "mlock/param_store.hpp"

namespace mlock {

// Standard normal CDF of (x - mean) / stddev. stddev > 0.
double gaussian_cdf(double x, double mean, double stddev);
// Inverse of the standard normal CDF on (0, 1).
double gaussian_quantile(double p);

// Analytic pre-transform that assumes Gaussian parameters. Lossy: codes are
// Φ quantized to `bits`, and values past the extreme code saturate.
struct GaussianPretransform {
  double mean = 0.0;
  double stddev = 1.0;
  Dtype dtype = Dtype::FP32;

  unsigned bits() const noexcept { return bit_width(dtype); }
  bool operator==(const GaussianPretransform&) const = default;
};

// Empirical look-up table. Every dtype code present in the source store owns
// a contiguous, non-empty interval of uniform codes whose width follows the
// code's frequency. The tables are step functions stored as
// (code, start) pairs in value order; `dense_*` expand them to 2^n entries.
struct EmpiricalLut {
  Dtype dtype = Dtype::FP32;
  std::vector<std::uint32_t> codes;   // strictly increasing in value order
  std::vector<std::uint64_t> starts;  // strictly increasing, starts[0] == 0

  unsigned bits() const noexcept { return bit_width(dtype); }
  std::uint64_t slot_count() const noexcept { return std::uint64_t{1} << bits(); }
  std::uint64_t width(std::size_t i) const noexcept {
    return (i + 1 < starts.size() ? starts[i + 1] : slot_count()) - starts[i];
  }

  // Uniform code interval of a dtype code, or nullopt if the code never
  // occurred in the store the table was built from.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> interval(std::uint32_t code) const;
  // Dtype code owning a uniform code.
  std::uint32_t decode(std::uint64_t uniform) const;

  // forward[c] = first uniform code of c (or of the next present code in
  // value order); inverse[u] = dtype code owning u. Only for bits() <= 16.
  std::vector<std::uint32_t> dense_forward() const;
  std::vector<std::uint32_t> dense_inverse() const;
  static EmpiricalLut from_dense(Dtype dtype, const std::vector<std::uint32_t>& forward,
                                 const std::vector<std::uint32_t>& inverse);

  bool operator==(const EmpiricalLut&) const = default;
};

using PreTransform = std::variant<GaussianPretransform, EmpiricalLut>;

// Dtype shared by every tensor of `store`; throws DescriptorError otherwise.
Dtype uniform_dtype(const ParamStore& store);

// `precision_bits` must equal the store dtype's width; widths above 32 raise
// CapacityError.
EmpiricalLut build_empirical_pretransform(const ParamStore& store, unsigned precision_bits);
GaussianPretransform fit_gaussian_pretransform(const ParamStore& store);

struct EncodeStats {
  std::uint64_t saturated = 0;  // Gaussian mode: values pinned to an extreme code
};

// Maps every element of `store` to a uniform code (little-endian, same width
// as the dtype, same layout as flatten()). `dither_seed` picks positions
// inside each code's interval.
Bytes pretransform_encode(const ParamStore& store, const PreTransform& pre, std::uint64_t dither_seed,
                          EncodeStats* stats = nullptr);
// Inverse of pretransform_encode for the given schema.
ParamStore pretransform_decode(ByteSpan codes, const Schema& schema, const PreTransform& pre);

}  // namespace mlock
