#pragma once

// Little-endian writer/reader shared by the MLPS and MLCK container formats.

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "mlock/crypto.hpp"
#include "mlock/errors.hpp"

namespace mlock::detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void bytes(ByteSpan b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void str16(std::string_view s) {
    if (s.size() > 0xffff) throw InvalidArgument("string too long for u16 length prefix");
    u16(static_cast<std::uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void str32(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void trailer() {
    const Digest d = sha256(out_);
    bytes(d);
  }

  Bytes& buffer() { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  ByteSpan bytes(std::size_t n) {
    need(n);
    ByteSpan s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str16() {
    const auto n = u16();
    const auto s = bytes(n);
    return {reinterpret_cast<const char*>(s.data()), s.size()};
  }
  std::string str32() {
    const auto n = u32();
    const auto s = bytes(n);
    return {reinterpret_cast<const char*>(s.data()), s.size()};
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw TruncatedError("unexpected end of data");
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  ByteSpan data_;
  std::size_t pos_ = 0;
};

// Verifies the trailing SHA-256 that covers file[0, body_len).
inline void check_trailer(ByteSpan file, std::size_t body_len, std::string_view what) {
  if (file.size() < body_len + 32) throw TruncatedError(std::string(what) + ": missing checksum trailer");
  if (file.size() > body_len + 32) throw FormatError(std::string(what) + ": trailing bytes after checksum");
  const Digest d = sha256(file.first(body_len));
  if (std::memcmp(d.data(), file.data() + body_len, 32) != 0) {
    throw ChecksumError(std::string(what) + ": SHA-256 trailer mismatch");
  }
}

Bytes read_file(const std::string& path);
void write_file(const std::string& path, ByteSpan data);

}  // namespace mlock::detail
