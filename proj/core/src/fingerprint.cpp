#include "mlock/fingerprint.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <random>

#if defined(__x86_64__) || defined(_M_X64)
#include <x86intrin.h>
#define MLOCK_HAVE_TSC 1
#endif

#include "mlock/errors.hpp"

namespace mlock {

std::string_view method_name(FingerprintMethod m) noexcept {
  switch (m) {
    case FingerprintMethod::Clock: return "clock";
    case FingerprintMethod::FinitePrecision: return "fp";
    case FingerprintMethod::PUF: return "puf";
    case FingerprintMethod::Composite: return "composite";
  }
  return "?";
}

std::optional<FingerprintMethod> parse_method(std::string_view name) noexcept {
  for (auto m : {FingerprintMethod::Clock, FingerprintMethod::FinitePrecision, FingerprintMethod::PUF,
                 FingerprintMethod::Composite}) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

void validate(const Fingerprint& fp) {
  if (fp.symbols.empty()) throw InvalidArgument("fingerprint has no symbols");
  for (char c : fp.symbols) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) {
      throw InvalidArgument("fingerprint symbols must be lowercase hex");
    }
  }
  if (fp.method == FingerprintMethod::Clock && fp.symbols.size() != kClockSymbols) {
    throw InvalidArgument("clock fingerprints have exactly 5 hex symbols");
  }
  if (fp.method == FingerprintMethod::FinitePrecision && fp.symbols.size() != 64) {
    throw InvalidArgument("finite-precision fingerprints have exactly 64 hex symbols");
  }
  if (fp.entropy_bits > 4 * fp.symbols.size()) throw InvalidArgument("entropy exceeds 4 bits per symbol");
}

// ---------------------------------------------------------------------------

bool CycleCounterProbe::available() const {
#ifdef MLOCK_HAVE_TSC
  return true;
#else
  return std::chrono::steady_clock::is_steady;
#endif
}

std::uint64_t CycleCounterProbe::measure(std::uint64_t iters) {
  std::uint64_t acc = 0x9e3779b97f4a7c15ull;
  const std::uint64_t step = 0x632be59bd9b4e019ull;
#ifdef MLOCK_HAVE_TSC
  unsigned aux = 0;
  _mm_lfence();
  const std::uint64_t t0 = __rdtsc();
  _mm_lfence();
  for (std::uint64_t i = 0; i < iters; ++i) {
    acc += step;
    asm volatile("" : "+r"(acc));  // keep the chain serial and unfolded
  }
  const std::uint64_t t1 = __rdtscp(&aux);
  _mm_lfence();
#else
  const auto t0 = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  for (std::uint64_t i = 0; i < iters; ++i) {
    acc += step;
    asm volatile("" : "+r"(acc));
  }
  const auto t1 = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
#endif
  asm volatile("" : : "r"(acc));
  return t1 - t0;
}

Fingerprint clock_fingerprint(std::uint64_t iters, unsigned trials, const ClockOptions& opts) {
  if (iters == 0) throw InvalidArgument("clock fingerprint needs iters >= 1");
  if (trials == 0) throw InvalidArgument("clock fingerprint needs trials >= 1");
  if (opts.divisor == 0) throw InvalidArgument("clock divisor must be positive");
  CycleCounterProbe fallback;
  TickProbe& probe = opts.probe != nullptr ? *opts.probe : fallback;
  if (!probe.available()) throw CapabilityError("no monotonic cycle counter available");

  std::map<std::uint64_t, unsigned> votes;
  for (unsigned t = 0; t < trials; ++t) ++votes[probe.measure(iters) / opts.divisor];

  const auto best = std::max_element(votes.begin(), votes.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  if (2 * best->second <= trials) {
    throw UnstableFingerprint("clock probe has no majority value across " + std::to_string(trials) + " trials",
                              votes.begin()->first, votes.rbegin()->first);
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05llx", static_cast<unsigned long long>(best->first & kClockMask));
  return Fingerprint{FingerprintMethod::Clock, buf, entropy_estimate(FingerprintMethod::Clock).bits};
}

// ---------------------------------------------------------------------------

namespace {

double round_to(double x, Dtype d) { return decode_value(encode_value(x, d), d); }

std::vector<double> random_layer(std::mt19937_64& rng, unsigned width, Dtype d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  std::vector<double> w(static_cast<std::size_t>(width) * width);
  for (auto& x : w) x = round_to(u(rng) * scale, d);
  return w;
}

std::vector<double> native_layer(const std::vector<double>& w, const std::vector<double>& x, Dtype d,
                                 AccumulationOrder order) {
  const std::size_t n = x.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (d == Dtype::FP32) {
      float acc = 0.0f;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order == AccumulationOrder::Forward ? k : n - 1 - k;
        acc += static_cast<float>(w[i * n + j]) * static_cast<float>(x[j]);
      }
      y[i] = acc;
    } else {
      // No native half arithmetic on the host: round after every operation.
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order == AccumulationOrder::Forward ? k : n - 1 - k;
        acc = round_to(acc + round_to(w[i * n + j] * x[j], d), d);
      }
      y[i] = acc;
    }
  }
  return y;
}

std::vector<double> reference_layer(const std::vector<double>& w, const std::vector<double>& x, Dtype d) {
  const std::size_t n = x.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += w[i * n + j] * x[j];
    y[i] = round_to(acc, d);
  }
  return y;
}

}  // namespace

std::vector<double> finite_precision_error(const FinitePrecisionConfig& cfg) {
  if (cfg.layers == 0 || cfg.width == 0) throw InvalidArgument("finite-precision probe needs layers, width >= 1");
  if (cfg.dtype == Dtype::INT8) throw InvalidArgument("finite-precision probe needs a floating-point dtype");
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> x(cfg.width);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = round_to(std::sin(static_cast<double>(j) + 1.0), cfg.dtype);
  std::vector<double> native = x;
  std::vector<double> ref = x;
  for (unsigned l = 0; l < cfg.layers; ++l) {
    const auto w = random_layer(rng, cfg.width, cfg.dtype);
    native = native_layer(w, native, cfg.dtype, cfg.order);
    ref = reference_layer(w, ref, cfg.dtype);
  }
  std::vector<double> err(cfg.width);
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = native[i] - ref[i];
  return err;
}

Fingerprint finite_precision_fingerprint(const FinitePrecisionConfig& cfg) {
  const auto err = finite_precision_error(cfg);
  Bytes bytes(err.size() * 8);
  for (std::size_t i = 0; i < err.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &err[i], 8);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return Fingerprint{FingerprintMethod::FinitePrecision, to_hex(sha256(bytes)),
                     entropy_estimate(FingerprintMethod::FinitePrecision, cfg.layers).bits};
}

// ---------------------------------------------------------------------------

SyntheticPuf::SyntheticPuf(std::uint64_t seed, double error_rate) : seed_(seed), error_rate_(error_rate) {
  if (!(error_rate >= 0.0 && error_rate <= 1.0)) throw InvalidArgument("PUF error rate must lie in [0, 1]");
}

BitVector SyntheticPuf::ground_truth(std::size_t bits) const {
  std::mt19937_64 rng(seed_);
  BitVector out(bits);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng() & 1u);
  return out;
}

BitVector SyntheticPuf::read(std::size_t bits, std::uint64_t read_index) const {
  BitVector out = ground_truth(bits);
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(read_index), static_cast<std::uint32_t>(read_index >> 32),
                    std::uint32_t{0x5eedf00d}};
  std::mt19937_64 noise(seq);
  std::bernoulli_distribution flip(error_rate_);
  for (auto& b : out) b ^= static_cast<std::uint8_t>(flip(noise));
  return out;
}

BitVector puf_read_file(const std::string& path, std::size_t bits) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open PUF source '" + path + "'");
  const Bytes raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() * 8 < bits) {
    throw CapacityError("PUF source holds " + std::to_string(raw.size() * 8) + " bits, need " + std::to_string(bits));
  }
  return unpack_bits(raw, bits);
}

Bytes pack_bits(std::span<const std::uint8_t> bits) {
  Bytes out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) out[i / 8] |= static_cast<std::uint8_t>((bits[i] & 1u) << (i % 8));
  return out;
}

BitVector unpack_bits(ByteSpan bytes, std::size_t bits) {
  BitVector out(bits);
  for (std::size_t i = 0; i < bits; ++i) out[i] = (bytes[i / 8] >> (i % 8)) & 1u;
  return out;
}

namespace {

std::array<std::uint8_t, 8> key_check_of(const Key256& key) {
  Bytes buf = {'m', 'l', 'o', 'c', 'k', '-', 'f', 'u', 'z', 'z', 'y'};
  buf.insert(buf.end(), key.begin(), key.end());
  const Digest d = sha256(buf);
  std::array<std::uint8_t, 8> out{};
  std::copy_n(d.begin(), 8, out.begin());
  return out;
}

BitVector repetition_codeword(std::span<const std::uint8_t> secret_bits, unsigned r) {
  BitVector cw(secret_bits.size() * r);
  for (std::size_t i = 0; i < secret_bits.size(); ++i) {
    std::fill_n(cw.begin() + static_cast<std::ptrdiff_t>(i * r), r, secret_bits[i]);
  }
  return cw;
}

}  // namespace

FuzzyEnrollment fuzzy_gen(std::span<const std::uint8_t> reference_bits, unsigned repetition,
                          std::optional<Key256> secret) {
  if (repetition < 3 || repetition % 2 == 0) throw InvalidArgument("repetition length must be odd and >= 3");
  if (reference_bits.size() != kFuzzyKeyBits * repetition) {
    throw InvalidArgument("fuzzy_gen needs exactly 256 * r reference bits");
  }
  Key256 s{};
  if (secret) {
    s = *secret;
  } else {
    const Bytes rnd = random_bytes(32);
    std::copy(rnd.begin(), rnd.end(), s.begin());
  }
  const BitVector secret_bits = unpack_bits(s, kFuzzyKeyBits);
  const BitVector cw = repetition_codeword(secret_bits, repetition);
  BitVector offset(cw.size());
  for (std::size_t i = 0; i < cw.size(); ++i) offset[i] = (reference_bits[i] & 1u) ^ cw[i];

  FuzzyEnrollment e;
  e.key = sha256(pack_bits(reference_bits));
  e.helper.repetition = repetition;
  e.helper.helper_data = pack_bits(offset);
  e.helper.key_check = key_check_of(e.key);
  return e;
}

Key256 fuzzy_rep(std::span<const std::uint8_t> noisy_bits, const FuzzyHelper& helper) {
  const unsigned r = helper.repetition;
  const std::size_t n = kFuzzyKeyBits * r;
  if (noisy_bits.size() != n || helper.helper_data.size() != n / 8) {
    throw InvalidArgument("fuzzy_rep input length does not match helper data");
  }
  const BitVector offset = unpack_bits(helper.helper_data, n);
  BitVector decoded(kFuzzyKeyBits);
  for (std::size_t blk = 0; blk < kFuzzyKeyBits; ++blk) {
    unsigned ones = 0;
    for (unsigned j = 0; j < r; ++j) ones += (noisy_bits[blk * r + j] & 1u) ^ offset[blk * r + j];
    decoded[blk] = ones * 2 > r ? 1 : 0;
  }
  const BitVector cw = repetition_codeword(decoded, r);
  BitVector corrected(n);
  for (std::size_t i = 0; i < n; ++i) corrected[i] = cw[i] ^ offset[i];
  const Key256 key = sha256(pack_bits(corrected));
  if (key_check_of(key) != helper.key_check) throw RecoveryFailed("fuzzy extractor could not recover the key");
  return key;
}

// ---------------------------------------------------------------------------

Key256 derive_key(const Fingerprint& fp) {
  if (fp.symbols.empty()) throw InvalidArgument("cannot derive a key from an empty fingerprint");
  Bytes buf;
  buf.reserve(fp.symbols.size() + 1);
  buf.push_back(static_cast<std::uint8_t>(fp.method));
  buf.insert(buf.end(), fp.symbols.begin(), fp.symbols.end());
  return sha256(buf);
}

EntropyEstimate entropy_estimate(FingerprintMethod method, unsigned probe_ops) {
  switch (method) {
    case FingerprintMethod::Clock: return {20, true, false};
    case FingerprintMethod::FinitePrecision: return {std::min(2 * probe_ops, 256u), false, true};
    case FingerprintMethod::PUF: return {256, false, false};
    case FingerprintMethod::Composite: return {256, true, false};
  }
  return {};
}

}  // namespace mlock
