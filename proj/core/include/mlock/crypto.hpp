#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mlock {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;
using Key256 = std::array<std::uint8_t, 32>;
using Nonce = std::array<std::uint8_t, 16>;

Digest sha256(ByteSpan data);
Digest sha256(std::string_view text);

// AES-256 in counter mode. The nonce is the initial 128-bit counter block,
// incremented big-endian per block. Encryption and decryption are the same
// operation.
Bytes aes256_ctr(const Key256& key, const Nonce& nonce, ByteSpan data);
void aes256_ctr_inplace(const Key256& key, const Nonce& nonce, std::span<std::uint8_t> data);
Bytes aes256_ctr_keystream(const Key256& key, const Nonce& nonce, std::size_t length);

Bytes random_bytes(std::size_t n);
Nonce random_nonce();

std::string to_hex(ByteSpan data);
template <std::size_t N>
std::string to_hex(const std::array<std::uint8_t, N>& a) {
  return to_hex(ByteSpan(a.data(), a.size()));
}
// Throws InvalidArgument on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

// Deterministic stream of 64-bit words from AES-256-CTR under `key` with a
// zero nonce. Used wherever a keyed, portable pseudo-random sequence is needed.
class KeyedStream {
 public:
  explicit KeyedStream(const Key256& key, const Nonce& nonce = {});
  std::uint64_t next_u64();
  // Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t uniform_below(std::uint64_t bound);

 private:
  void refill();

  Key256 key_;
  Nonce counter_;
  std::array<std::uint8_t, 4096> buf_{};
  std::size_t pos_ = sizeof(buf_);
};

}  // namespace mlock
