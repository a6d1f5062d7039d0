#include "mlock/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cstring>
#include <memory>

#include "mlock/errors.hpp"

namespace mlock {

namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const noexcept { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

void ctr_xor(const Key256& key, const Nonce& nonce, const std::uint8_t* in, std::uint8_t* out,
             std::size_t n) {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_ctr(), nullptr, key.data(), nonce.data()) != 1) {
    throw CapabilityError("AES-256-CTR unavailable in libcrypto");
  }
  std::size_t done = 0;
  while (done < n) {
    const int chunk = static_cast<int>(std::min<std::size_t>(n - done, 1u << 30));
    int outl = 0;
    if (EVP_EncryptUpdate(ctx.get(), out + done, &outl, in + done, chunk) != 1) {
      throw CapabilityError("AES-256-CTR update failed");
    }
    done += static_cast<std::size_t>(outl);
  }
}

// Adds `blocks` to a big-endian 128-bit counter.
void counter_add(Nonce& ctr, std::uint64_t blocks) {
  for (int i = 15; i >= 0 && blocks != 0; --i) {
    const std::uint64_t sum = ctr[static_cast<std::size_t>(i)] + (blocks & 0xff);
    ctr[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(sum);
    blocks = (blocks >> 8) + (sum >> 8);
  }
}

}  // namespace

Digest sha256(ByteSpan data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw CapabilityError("SHA-256 unavailable in libcrypto");
  }
  return out;
}

Digest sha256(std::string_view text) {
  return sha256(ByteSpan(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Bytes aes256_ctr(const Key256& key, const Nonce& nonce, ByteSpan data) {
  Bytes out(data.size());
  if (!data.empty()) ctr_xor(key, nonce, data.data(), out.data(), data.size());
  return out;
}

void aes256_ctr_inplace(const Key256& key, const Nonce& nonce, std::span<std::uint8_t> data) {
  if (!data.empty()) ctr_xor(key, nonce, data.data(), data.data(), data.size());
}

Bytes aes256_ctr_keystream(const Key256& key, const Nonce& nonce, std::size_t length) {
  Bytes zeros(length, 0);
  aes256_ctr_inplace(key, nonce, zeros);
  return zeros;
}

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  if (n != 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1) {
    throw CapabilityError("system random source unavailable");
  }
  return out;
}

Nonce random_nonce() {
  Nonce n{};
  const Bytes b = random_bytes(n.size());
  std::memcpy(n.data(), b.data(), n.size());
  return n;
}

std::string to_hex(ByteSpan data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(data.size() * 2);
  for (auto b : data) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw InvalidArgument("hex string has odd length");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw InvalidArgument("invalid hex character");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

KeyedStream::KeyedStream(const Key256& key, const Nonce& nonce) : key_(key), counter_(nonce) {}

void KeyedStream::refill() {
  std::memset(buf_.data(), 0, buf_.size());
  aes256_ctr_inplace(key_, counter_, buf_);
  counter_add(counter_, buf_.size() / 16);
  pos_ = 0;
}

std::uint64_t KeyedStream::next_u64() {
  if (pos_ + 8 > buf_.size()) refill();
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
  pos_ += 8;
  return v;
}

std::uint64_t KeyedStream::uniform_below(std::uint64_t bound) {
  // Rejection on the largest multiple of bound keeps the draw unbiased.
  const std::uint64_t limit = bound * (UINT64_MAX / bound);
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

}  // namespace mlock
