#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mlock {

// Storage type of a parameter tensor. The numeric tag values are part of the
// on-disk formats and must not be renumbered.
enum class Dtype : std::uint8_t {
  FP32 = 0,
  FP16 = 1,
  MiniFloat16 = 2,  // exponent width 5, bias 11, 10 mantissa bits
  MiniFloat8 = 3,   // exponent width 4, bias 7, 3 mantissa bits
  INT8 = 4,         // affine: value = scale * (q - zero_point), params in store meta
};

std::size_t byte_width(Dtype d) noexcept;
unsigned bit_width(Dtype d) noexcept;
std::string_view dtype_name(Dtype d) noexcept;
std::optional<Dtype> parse_dtype(std::string_view name) noexcept;
std::optional<Dtype> dtype_from_tag(std::uint8_t tag) noexcept;
bool is_float(Dtype d) noexcept;

// Binary layout of a small IEEE-style float: sign, exponent field, mantissa.
// The all-ones exponent encodes inf/NaN.
struct MiniFloatFormat {
  int exp_bits;
  int man_bits;
  int bias;
};

inline constexpr MiniFloatFormat kHalf{5, 10, 15};
inline constexpr MiniFloatFormat kMiniFloat16{5, 10, 11};
inline constexpr MiniFloatFormat kMiniFloat8{4, 3, 7};

enum class Overflow { ToInfinity, Saturate };

// Round-to-nearest-even encode of `x` into the format's bit pattern.
std::uint32_t minifloat_encode(double x, MiniFloatFormat fmt, Overflow overflow = Overflow::ToInfinity);
double minifloat_decode(std::uint32_t bits, MiniFloatFormat fmt);
double minifloat_max_finite(MiniFloatFormat fmt);

struct AffineParams {
  float scale = 1.0f;
  std::int32_t zero_point = 0;
};

std::int8_t int8_encode(double x, const AffineParams& p);
float int8_decode(std::int8_t q, const AffineParams& p);

// Encode/decode one value of a dtype from/to its little-endian code.
std::uint32_t encode_value(double x, Dtype d, const AffineParams& affine = {});
double decode_value(std::uint32_t code, Dtype d, const AffineParams& affine = {});

// Monotone key for the value ordering of a code: -NaN < -inf < ... < -0 < +0
// < ... < +inf < +NaN for floats, two's-complement order for INT8.
std::uint32_t order_key(std::uint32_t code, Dtype d) noexcept;
std::uint32_t code_from_order_key(std::uint32_t key, Dtype d) noexcept;

}  // namespace mlock
