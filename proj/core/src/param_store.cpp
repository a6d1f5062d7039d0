#include "mlock/param_store.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "byte_io.hpp"
#include "mlock/errors.hpp"

namespace mlock {

namespace {

constexpr std::uint8_t kMagic[4] = {0x4D, 0x4C, 0x50, 0x53};  // "MLPS"

std::string scale_key(const std::string& name) { return "int8.scale:" + name; }
std::string zero_point_key(const std::string& name) { return "int8.zero_point:" + name; }

void validate(const ParamTensor& t) {
  for (auto d : t.shape) {
    if (d == 0) throw SchemaError("tensor '" + t.name + "' has a zero dimension");
  }
  if (t.data.size() != t.byte_size()) {
    throw SchemaError("tensor '" + t.name + "' data length " + std::to_string(t.data.size()) +
                      " does not match shape (" + std::to_string(t.byte_size()) + " bytes)");
  }
}

}  // namespace

std::uint64_t element_count(const Shape& shape) noexcept {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::uint32_t ParamTensor::code(std::size_t i) const noexcept {
  const std::size_t w = byte_width(dtype);
  std::uint32_t v = 0;
  for (std::size_t b = 0; b < w; ++b) v |= static_cast<std::uint32_t>(data[i * w + b]) << (8 * b);
  return v;
}

void ParamTensor::set_code(std::size_t i, std::uint32_t code) noexcept {
  const std::size_t w = byte_width(dtype);
  for (std::size_t b = 0; b < w; ++b) data[i * w + b] = static_cast<std::uint8_t>(code >> (8 * b));
}

std::size_t schema_byte_size(const Schema& schema) noexcept {
  std::size_t n = 0;
  for (const auto& s : schema) n += static_cast<std::size_t>(element_count(s.shape)) * byte_width(s.dtype);
  return n;
}

void ParamStore::add(ParamTensor tensor) {
  validate(tensor);
  if (find(tensor.name) != nullptr) throw SchemaError("duplicate tensor name '" + tensor.name + "'");
  tensors_.push_back(std::move(tensor));
}

void ParamStore::add_fp32(std::string name, Shape shape, std::span<const float> values) {
  ParamTensor t{std::move(name), std::move(shape), Dtype::FP32, Bytes(values.size() * 4)};
  if (!values.empty()) std::memcpy(t.data.data(), values.data(), values.size() * 4);
  add(std::move(t));
}

const ParamTensor* ParamStore::find(const std::string& name) const noexcept {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::uint64_t ParamStore::total_count() const noexcept {
  std::uint64_t n = 0;
  for (const auto& t : tensors_) n += t.count();
  return n;
}

Schema ParamStore::schema() const {
  Schema s;
  s.reserve(tensors_.size());
  for (const auto& t : tensors_) s.push_back({t.name, t.shape, t.dtype});
  return s;
}

AffineParams ParamStore::affine(const std::string& tensor_name) const {
  AffineParams p;
  if (auto it = meta_.find(scale_key(tensor_name)); it != meta_.end()) p.scale = std::stof(it->second);
  if (auto it = meta_.find(zero_point_key(tensor_name)); it != meta_.end()) p.zero_point = std::stoi(it->second);
  return p;
}

void ParamStore::set_affine(const std::string& tensor_name, const AffineParams& p) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(p.scale));
  meta_[scale_key(tensor_name)] = buf;
  meta_[zero_point_key(tensor_name)] = std::to_string(p.zero_point);
}

std::vector<float> ParamStore::values(std::size_t i) const {
  const ParamTensor& t = tensors_.at(i);
  const std::size_t n = static_cast<std::size_t>(t.count());
  std::vector<float> out(n);
  if (t.dtype == Dtype::FP32) {
    std::memcpy(out.data(), t.data.data(), n * 4);
    return out;
  }
  const AffineParams a = t.dtype == Dtype::INT8 ? affine(t.name) : AffineParams{};
  for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<float>(decode_value(t.code(j), t.dtype, a));
  return out;
}

std::vector<float> ParamStore::all_values() const {
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(total_count()));
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto v = values(i);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

Bytes flatten(const ParamStore& store) {
  Bytes out;
  std::size_t total = 0;
  for (const auto& t : store.tensors()) total += t.data.size();
  out.reserve(total);
  for (const auto& t : store.tensors()) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

ParamStore unflatten(ByteSpan bytes, const Schema& schema) {
  const std::size_t expected = schema_byte_size(schema);
  if (bytes.size() != expected) {
    throw SchemaError("byte stream length " + std::to_string(bytes.size()) + " does not match schema (" +
                      std::to_string(expected) + ")");
  }
  ParamStore store;
  std::size_t off = 0;
  for (const auto& spec : schema) {
    const std::size_t n = static_cast<std::size_t>(element_count(spec.shape)) * byte_width(spec.dtype);
    store.add(ParamTensor{spec.name, spec.shape, spec.dtype, Bytes(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                                                                   bytes.begin() + static_cast<std::ptrdiff_t>(off + n))});
    off += n;
  }
  return store;
}

Bytes serialize_store(const ParamStore& store) {
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u16(kStoreFormatVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& t : store.tensors()) {
    w.str16(t.name);
    w.u8(static_cast<std::uint8_t>(t.dtype));
    if (t.shape.size() > 0xff) throw SchemaError("tensor rank exceeds 255");
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) w.u64(d);
    w.bytes(t.data);
  }
  w.u32(static_cast<std::uint32_t>(store.meta().size()));
  for (const auto& [k, v] : store.meta()) {
    w.str16(k);
    w.str32(v);
  }
  w.trailer();
  return w.take();
}

ParamStore deserialize_store(ByteSpan file) {
  if (file.size() < 4 || std::memcmp(file.data(), kMagic, 4) != 0) throw FormatError("MLPS: bad magic");
  detail::ByteReader r(file);
  r.bytes(4);
  const auto version = r.u16();
  if (version != kStoreFormatVersion) {
    throw VersionError("MLPS: unsupported version " + std::to_string(version));
  }
  ParamStore store;
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    ParamTensor t;
    t.name = r.str16();
    const auto tag = r.u8();
    const auto dtype = dtype_from_tag(tag);
    if (!dtype) throw FormatError("MLPS: unknown dtype tag " + std::to_string(tag));
    t.dtype = *dtype;
    const auto rank = r.u8();
    t.shape.resize(rank);
    for (auto& d : t.shape) d = r.u64();
    const auto n = element_count(t.shape) * byte_width(t.dtype);
    if (n > r.remaining()) throw TruncatedError("MLPS: tensor '" + t.name + "' data truncated");
    auto data = r.bytes(static_cast<std::size_t>(n));
    t.data.assign(data.begin(), data.end());
    store.add(std::move(t));
  }
  const auto meta_count = r.u32();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    auto key = r.str16();
    store.meta()[key] = r.str32();
  }
  detail::check_trailer(file, r.position(), "MLPS");
  return store;
}

void save_store(const ParamStore& store, const std::string& path) {
  detail::write_file(path, serialize_store(store));
}

ParamStore load_store(const std::string& path) { return deserialize_store(detail::read_file(path)); }

namespace detail {

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "' for reading");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, ByteSpan data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw InvalidArgument("write to '" + path + "' failed");
}

}  // namespace detail

}  // namespace mlock
