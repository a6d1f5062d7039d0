#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlock/crypto.hpp"
#include "mlock/dtype.hpp"

namespace mlock {

// Tag values double as the domain-separation byte in derive_key.
enum class FingerprintMethod : std::uint8_t {
  Clock = 0x01,
  FinitePrecision = 0x02,
  PUF = 0x03,
  Composite = 0x04,
};

std::string_view method_name(FingerprintMethod m) noexcept;
std::optional<FingerprintMethod> parse_method(std::string_view name) noexcept;

struct Fingerprint {
  FingerprintMethod method = FingerprintMethod::Clock;
  std::string symbols;  // lowercase hex
  unsigned entropy_bits = 0;

  bool operator==(const Fingerprint&) const = default;
};

// Checks method-specific symbol length and the entropy ceiling of 4 bits per
// hex symbol. Throws InvalidArgument.
void validate(const Fingerprint& fp);

struct HardwareProfile {
  std::string label;
  std::vector<Fingerprint> authorized;
};

// ---------------------------------------------------------------------------
// Clock fingerprint

// Times a run of dependent additions. Implementations return elapsed ticks.
class TickProbe {
 public:
  virtual ~TickProbe() = default;
  virtual bool available() const = 0;
  virtual std::uint64_t measure(std::uint64_t iters) = 0;
};

// Host cycle counter (rdtsc on x86-64, steady_clock nanoseconds elsewhere).
class CycleCounterProbe final : public TickProbe {
 public:
  bool available() const override;
  std::uint64_t measure(std::uint64_t iters) override;
};

struct ClockOptions {
  std::uint64_t divisor = 1u << 16;  // quantization step applied to raw ticks
  TickProbe* probe = nullptr;        // defaults to CycleCounterProbe
};

inline constexpr std::size_t kClockSymbols = 5;
inline constexpr std::uint32_t kClockMask = 0xfffff;

// Majority vote over `trials` quantized tick counts, rendered as five
// lowercase hex symbols. Throws CapabilityError without a counter and
// UnstableFingerprint when no value wins a strict majority.
Fingerprint clock_fingerprint(std::uint64_t iters, unsigned trials, const ClockOptions& opts = {});

// ---------------------------------------------------------------------------
// Finite-precision fingerprint

enum class AccumulationOrder { Forward, Reversed };

struct FinitePrecisionConfig {
  std::uint64_t seed = 0;
  unsigned layers = 8;
  unsigned width = 256;
  Dtype dtype = Dtype::FP32;
  AccumulationOrder order = AccumulationOrder::Forward;
};

// Difference between the native-precision chain and the pinned extended
// precision reference, one entry per output unit.
std::vector<double> finite_precision_error(const FinitePrecisionConfig& cfg);
Fingerprint finite_precision_fingerprint(const FinitePrecisionConfig& cfg);

// ---------------------------------------------------------------------------
// PUF source and fuzzy extraction. Bit vectors hold one bit (0/1) per byte.

using BitVector = std::vector<std::uint8_t>;

inline constexpr double kDefaultPufErrorRate = 0.05;

// Simulated SRAM start-up state: a hidden ground truth derived from `seed`,
// each read flipping bits independently with probability `error_rate`.
class SyntheticPuf {
 public:
  explicit SyntheticPuf(std::uint64_t seed, double error_rate = kDefaultPufErrorRate);

  BitVector ground_truth(std::size_t bits) const;
  BitVector read(std::size_t bits, std::uint64_t read_index) const;
  double error_rate() const noexcept { return error_rate_; }

 private:
  std::uint64_t seed_;
  double error_rate_;
};

// Reads the first `bits` bits (LSB-first per byte) of a dump file. Throws
// CapacityError when the file is too short.
BitVector puf_read_file(const std::string& path, std::size_t bits);

struct FuzzyHelper {
  unsigned repetition = 9;
  Bytes helper_data;  // code offset, packed, repetition * 32 bytes
  std::array<std::uint8_t, 8> key_check{};
};

struct FuzzyEnrollment {
  Key256 key{};
  FuzzyHelper helper;
};

inline constexpr std::size_t kFuzzyKeyBits = 256;

// Code-offset secure sketch over a length-r repetition code. `secret` is the
// 256-bit random codeword seed; pass nothing to draw it from the system RNG.
FuzzyEnrollment fuzzy_gen(std::span<const std::uint8_t> reference_bits, unsigned repetition,
                          std::optional<Key256> secret = std::nullopt);
// Throws RecoveryFailed when the recovered key does not match key_check.
Key256 fuzzy_rep(std::span<const std::uint8_t> noisy_bits, const FuzzyHelper& helper);

Bytes pack_bits(std::span<const std::uint8_t> bits);
BitVector unpack_bits(ByteSpan bytes, std::size_t bits);

// ---------------------------------------------------------------------------

Key256 derive_key(const Fingerprint& fp);

struct EntropyEstimate {
  unsigned bits = 0;
  bool upper_bound = false;
  bool theoretical = false;
};

EntropyEstimate entropy_estimate(FingerprintMethod method, unsigned probe_ops = 8);

}  // namespace mlock
