#include "mlock/dtype.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace mlock {

std::size_t byte_width(Dtype d) noexcept {
  switch (d) {
    case Dtype::FP32: return 4;
    case Dtype::FP16:
    case Dtype::MiniFloat16: return 2;
    case Dtype::MiniFloat8:
    case Dtype::INT8: return 1;
  }
  return 0;
}

unsigned bit_width(Dtype d) noexcept { return static_cast<unsigned>(byte_width(d) * 8); }

std::string_view dtype_name(Dtype d) noexcept {
  switch (d) {
    case Dtype::FP32: return "fp32";
    case Dtype::FP16: return "fp16";
    case Dtype::MiniFloat16: return "minifloat16";
    case Dtype::MiniFloat8: return "minifloat8";
    case Dtype::INT8: return "int8";
  }
  return "?";
}

std::optional<Dtype> parse_dtype(std::string_view name) noexcept {
  for (auto d : {Dtype::FP32, Dtype::FP16, Dtype::MiniFloat16, Dtype::MiniFloat8, Dtype::INT8}) {
    if (dtype_name(d) == name) return d;
  }
  return std::nullopt;
}

std::optional<Dtype> dtype_from_tag(std::uint8_t tag) noexcept {
  if (tag > static_cast<std::uint8_t>(Dtype::INT8)) return std::nullopt;
  return static_cast<Dtype>(tag);
}

bool is_float(Dtype d) noexcept { return d != Dtype::INT8; }

double minifloat_max_finite(MiniFloatFormat fmt) {
  const int max_field = (1 << fmt.exp_bits) - 2;
  return std::ldexp(2.0 - std::ldexp(1.0, -fmt.man_bits), max_field - fmt.bias);
}

std::uint32_t minifloat_encode(double x, MiniFloatFormat fmt, Overflow overflow) {
  const int total = 1 + fmt.exp_bits + fmt.man_bits;
  const std::uint32_t sign = std::signbit(x) ? (1u << (total - 1)) : 0u;
  const std::uint32_t exp_ones = ((1u << fmt.exp_bits) - 1u) << fmt.man_bits;
  const std::uint32_t max_finite_bits = exp_ones - 1u;  // exponent field all-ones minus one, mantissa all ones
  if (std::isnan(x)) return sign | exp_ones | (1u << (fmt.man_bits - 1));
  const double a = std::fabs(x);
  if (std::isinf(a)) return sign | (overflow == Overflow::Saturate ? max_finite_bits : exp_ones);
  if (a == 0.0) return sign;

  const int min_exp = 1 - fmt.bias;
  const int max_exp = (1 << fmt.exp_bits) - 2 - fmt.bias;
  int e = 0;
  std::frexp(a, &e);
  int unbiased = std::max(e - 1, min_exp);
  const double one = std::ldexp(1.0, fmt.man_bits);
  double r = std::nearbyint(std::ldexp(a, fmt.man_bits - unbiased));
  if (r >= 2.0 * one) {
    unbiased += 1;
    r = one;
  }
  if (unbiased > max_exp) {
    return sign | (overflow == Overflow::Saturate ? max_finite_bits : exp_ones);
  }
  const auto ri = static_cast<std::uint32_t>(r);
  if (ri >= static_cast<std::uint32_t>(one)) {
    const auto field = static_cast<std::uint32_t>(unbiased + fmt.bias);
    return sign | (field << fmt.man_bits) | (ri - static_cast<std::uint32_t>(one));
  }
  return sign | ri;  // subnormal
}

double minifloat_decode(std::uint32_t bits, MiniFloatFormat fmt) {
  const int total = 1 + fmt.exp_bits + fmt.man_bits;
  const bool neg = (bits >> (total - 1)) & 1u;
  const std::uint32_t field = (bits >> fmt.man_bits) & ((1u << fmt.exp_bits) - 1u);
  const std::uint32_t man = bits & ((1u << fmt.man_bits) - 1u);
  double v;
  if (field == (1u << fmt.exp_bits) - 1u) {
    v = man == 0 ? INFINITY : NAN;
  } else if (field == 0) {
    v = std::ldexp(static_cast<double>(man), 1 - fmt.bias - fmt.man_bits);
  } else {
    v = std::ldexp(static_cast<double>(man | (1u << fmt.man_bits)),
                   static_cast<int>(field) - fmt.bias - fmt.man_bits);
  }
  return neg ? -v : v;
}

std::int8_t int8_encode(double x, const AffineParams& p) {
  if (std::isnan(x) || p.scale == 0.0f) return static_cast<std::int8_t>(std::clamp(p.zero_point, -128, 127));
  const double q = std::nearbyint(x / static_cast<double>(p.scale)) + p.zero_point;
  return static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
}

float int8_decode(std::int8_t q, const AffineParams& p) {
  return static_cast<float>(static_cast<double>(p.scale) * (static_cast<int>(q) - p.zero_point));
}

std::uint32_t encode_value(double x, Dtype d, const AffineParams& affine) {
  switch (d) {
    case Dtype::FP32: return std::bit_cast<std::uint32_t>(static_cast<float>(x));
    case Dtype::FP16: return minifloat_encode(x, kHalf);
    case Dtype::MiniFloat16: return minifloat_encode(x, kMiniFloat16);
    case Dtype::MiniFloat8: return minifloat_encode(x, kMiniFloat8);
    case Dtype::INT8: return static_cast<std::uint8_t>(int8_encode(x, affine));
  }
  return 0;
}

double decode_value(std::uint32_t code, Dtype d, const AffineParams& affine) {
  switch (d) {
    case Dtype::FP32: return std::bit_cast<float>(code);
    case Dtype::FP16: return minifloat_decode(code & 0xffffu, kHalf);
    case Dtype::MiniFloat16: return minifloat_decode(code & 0xffffu, kMiniFloat16);
    case Dtype::MiniFloat8: return minifloat_decode(code & 0xffu, kMiniFloat8);
    case Dtype::INT8: return int8_decode(static_cast<std::int8_t>(code & 0xffu), affine);
  }
  return 0.0;
}

std::uint32_t order_key(std::uint32_t code, Dtype d) noexcept {
  const unsigned bits = bit_width(d);
  const std::uint32_t mask = bits == 32 ? 0xffffffffu : ((1u << bits) - 1u);
  const std::uint32_t top = 1u << (bits - 1);
  code &= mask;
  if (d == Dtype::INT8) return code ^ top;
  return (code & top) ? (~code & mask) : (code | top);
}

std::uint32_t code_from_order_key(std::uint32_t key, Dtype d) noexcept {
  const unsigned bits = bit_width(d);
  const std::uint32_t mask = bits == 32 ? 0xffffffffu : ((1u << bits) - 1u);
  const std::uint32_t top = 1u << (bits - 1);
  key &= mask;
  if (d == Dtype::INT8) return key ^ top;
  return (key & top) ? (key & ~top) : (~key & mask);
}

}  // namespace mlock
