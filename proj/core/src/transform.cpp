#include "mlock/transform.hpp"

#include <cstring>
#include <utility>

#include "byte_io.hpp"
#include "mlock/errors.hpp"

namespace mlock {

namespace {

constexpr std::uint8_t kMagic[4] = {0x4D, 0x4C, 0x43, 0x4B};  // "MLCK"

enum PreTag : std::uint8_t { kPreNone = 0, kPreGaussian = 1, kPreDenseLut = 2, kPreSparseLut = 3 };

LockedModel make_locked(const ParamStore& store, TransformKind kind, const Nonce& nonce, Bytes payload) {
  LockedModel m;
  m.descriptor = {kind, nonce, store.schema()};
  m.meta = store.meta();
  m.integrity = sha256(payload);
  m.payload = std::move(payload);
  return m;
}

void check_payload(const LockedModel& locked, TransformKind kind) {
  if (locked.descriptor.kind != kind) throw DescriptorError("locked model uses a different transform kind");
  if (locked.payload.size() != schema_byte_size(locked.descriptor.schema)) {
    throw SchemaError("payload length does not match the locked schema");
  }
}

void restore_meta(ParamStore& store, const LockedModel& locked) {
  for (const auto& [k, v] : locked.meta) {
    if (!k.starts_with(kLockMetaPrefix)) store.meta()[k] = v;
  }
}

std::uint64_t dither_seed(const Nonce& nonce) {
  std::uint64_t s = 0;
  for (int i = 0; i < 8; ++i) s |= static_cast<std::uint64_t>(nonce[i]) << (8 * i);
  return s;
}

// Positions of every element of one dtype, in flat order.
struct Group {
  Dtype dtype;
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (tensor, element)
};

std::vector<Group> dtype_groups(const ParamStore& store) {
  std::vector<Group> groups;
  for (std::uint8_t tag = 0; tag <= static_cast<std::uint8_t>(Dtype::INT8); ++tag) {
    Group g{*dtype_from_tag(tag), {}};
    for (std::size_t t = 0; t < store.size(); ++t) {
      if (store.tensor(t).dtype != g.dtype) continue;
      for (std::size_t i = 0; i < store.tensor(t).count(); ++i) g.slots.emplace_back(t, i);
    }
    if (!g.slots.empty()) groups.push_back(std::move(g));
  }
  return groups;
}

KeyedStream group_stream(const Key256& key, Dtype d) {
  Nonce n{};
  n[0] = 'S';
  n[1] = static_cast<std::uint8_t>(d);
  return KeyedStream(key, n);
}

// Fisher-Yates swap targets: swaps[k] pairs position m-1-k with swaps[k].
std::vector<std::uint64_t> swap_targets(const Key256& key, Dtype d, std::size_t m) {
  std::vector<std::uint64_t> swaps;
  if (m < 2) return swaps;
  swaps.reserve(m - 1);
  KeyedStream ks = group_stream(key, d);
  for (std::size_t i = m - 1; i > 0; --i) swaps.push_back(ks.uniform_below(i + 1));
  return swaps;
}

void permute(ParamStore& store, const Key256& key, bool inverse) {
  for (const auto& g : dtype_groups(store)) {
    const std::size_t m = g.slots.size();
    std::vector<std::uint32_t> codes(m);
    for (std::size_t k = 0; k < m; ++k) codes[k] = store.tensor(g.slots[k].first).code(g.slots[k].second);
    const auto swaps = swap_targets(key, g.dtype, m);
    if (!inverse) {
      for (std::size_t k = 0; k < swaps.size(); ++k) std::swap(codes[m - 1 - k], codes[swaps[k]]);
    } else {
      for (std::size_t k = swaps.size(); k-- > 0;) std::swap(codes[m - 1 - k], codes[swaps[k]]);
    }
    auto& tensors = store.mutable_tensors();
    for (std::size_t k = 0; k < m; ++k) tensors[g.slots[k].first].set_code(g.slots[k].second, codes[k]);
  }
}

}  // namespace

std::string_view kind_name(TransformKind k) noexcept {
  switch (k) {
    case TransformKind::AES: return "aes";
    case TransformKind::Shuffle: return "shuffle";
    case TransformKind::PretransformedAES: return "pt-aes";
  }
  return "?";
}

std::optional<TransformKind> parse_kind(std::string_view name) noexcept {
  if (name == "aes") return TransformKind::AES;
  if (name == "shuffle") return TransformKind::Shuffle;
  if (name == "pt-aes") return TransformKind::PretransformedAES;
  return std::nullopt;
}

void shuffle_values(ParamStore& store, const Key256& key) { permute(store, key, false); }
void unshuffle_values(ParamStore& store, const Key256& key) { permute(store, key, true); }

LockedModel aes_lock(const ParamStore& store, const Key256& key, std::optional<Nonce> nonce) {
  const Nonce n = nonce.value_or(random_nonce());
  return make_locked(store, TransformKind::AES, n, aes256_ctr(key, n, flatten(store)));
}

ParamStore aes_unlock(const LockedModel& locked, const Key256& key) {
  check_payload(locked, TransformKind::AES);
  ParamStore out = unflatten(aes256_ctr(key, locked.descriptor.nonce, locked.payload), locked.descriptor.schema);
  restore_meta(out, locked);
  return out;
}

LockedModel shuffle_lock(const ParamStore& store, const Key256& key) {
  ParamStore copy = store;
  shuffle_values(copy, key);
  return make_locked(store, TransformKind::Shuffle, Nonce{}, flatten(copy));
}

ParamStore shuffle_unlock(const LockedModel& locked, const Key256& key) {
  check_payload(locked, TransformKind::Shuffle);
  ParamStore out = unflatten(locked.payload, locked.descriptor.schema);
  unshuffle_values(out, key);
  restore_meta(out, locked);
  return out;
}

LockedModel pretransformed_aes_lock(const ParamStore& store, const Key256& key, const PreTransform& pre,
                                    std::optional<Nonce> nonce) {
  const Nonce n = nonce.value_or(random_nonce());
  EncodeStats stats;
  Bytes codes = pretransform_encode(store, pre, dither_seed(n), &stats);
  aes256_ctr_inplace(key, n, codes);
  LockedModel m = make_locked(store, TransformKind::PretransformedAES, n, std::move(codes));
  m.pretransform = pre;
  if (std::holds_alternative<GaussianPretransform>(pre)) {
    m.meta[std::string(kLockMetaPrefix) + "pretransform.saturated"] = std::to_string(stats.saturated);
  }
  return m;
}

ParamStore pretransformed_aes_unlock(const LockedModel& locked, const Key256& key) {
  check_payload(locked, TransformKind::PretransformedAES);
  if (!locked.pretransform) throw DescriptorError("pre-transformed lock carries no pre-transform table");
  const Bytes codes = aes256_ctr(key, locked.descriptor.nonce, locked.payload);
  ParamStore out = pretransform_decode(codes, locked.descriptor.schema, *locked.pretransform);
  restore_meta(out, locked);
  return out;
}

LockedModel lock(const ParamStore& store, const Key256& key, TransformKind kind,
                 const std::optional<PreTransform>& pre, std::optional<Nonce> nonce) {
  switch (kind) {
    case TransformKind::AES: return aes_lock(store, key, nonce);
    case TransformKind::Shuffle: return shuffle_lock(store, key);
    case TransformKind::PretransformedAES:
      if (!pre) throw DescriptorError("pre-transformed AES needs a pre-transform");
      return pretransformed_aes_lock(store, key, *pre, nonce);
  }
  throw DescriptorError("unknown transform kind");
}

ParamStore unlock(const LockedModel& locked, const Key256& key) {
  switch (locked.descriptor.kind) {
    case TransformKind::AES: return aes_unlock(locked, key);
    case TransformKind::Shuffle: return shuffle_unlock(locked, key);
    case TransformKind::PretransformedAES: return pretransformed_aes_unlock(locked, key);
  }
  throw DescriptorError("unknown transform kind");
}

// ---------------------------------------------------------------------------
// MLCK

Bytes serialize_locked(const LockedModel& locked) {
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u16(kLockedFormatVersion);
  w.u8(static_cast<std::uint8_t>(locked.descriptor.kind));
  w.bytes(locked.descriptor.nonce);

  w.u32(static_cast<std::uint32_t>(locked.descriptor.schema.size()));
  for (const auto& s : locked.descriptor.schema) {
    w.str16(s.name);
    w.u8(static_cast<std::uint8_t>(s.dtype));
    if (s.shape.size() > 0xff) throw SchemaError("tensor rank exceeds 255");
    w.u8(static_cast<std::uint8_t>(s.shape.size()));
    for (auto d : s.shape) w.u64(d);
  }
  w.u32(static_cast<std::uint32_t>(locked.meta.size()));
  for (const auto& [k, v] : locked.meta) {
    w.str16(k);
    w.str32(v);
  }

  if (!locked.pretransform) {
    w.u8(kPreNone);
  } else if (const auto* g = std::get_if<GaussianPretransform>(&*locked.pretransform)) {
    w.u8(kPreGaussian);
    w.f64(g->mean);
    w.f64(g->stddev);
    w.u8(static_cast<std::uint8_t>(g->dtype));
  } else {
    const auto& lut = std::get<EmpiricalLut>(*locked.pretransform);
    if (lut.bits() <= 16) {
      w.u8(kPreDenseLut);
      w.u8(static_cast<std::uint8_t>(lut.dtype));
      for (auto v : lut.dense_forward()) w.u32(v);
      for (auto v : lut.dense_inverse()) w.u32(v);
    } else {
      w.u8(kPreSparseLut);
      w.u8(static_cast<std::uint8_t>(lut.dtype));
      w.u32(static_cast<std::uint32_t>(lut.codes.size()));
      for (std::size_t i = 0; i < lut.codes.size(); ++i) {
        w.u32(lut.codes[i]);
        w.u32(static_cast<std::uint32_t>(lut.starts[i]));
      }
    }
  }

  w.bytes(locked.integrity);
  w.u64(locked.payload.size());
  w.bytes(locked.payload);
  w.trailer();
  return w.take();
}

LockedModel deserialize_locked(ByteSpan file) {
  if (file.size() < 4 || std::memcmp(file.data(), kMagic, 4) != 0) throw FormatError("MLCK: bad magic");
  detail::ByteReader r(file);
  r.bytes(4);
  const auto version = r.u16();
  if (version != kLockedFormatVersion) throw VersionError("MLCK: unsupported version " + std::to_string(version));

  LockedModel m;
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(TransformKind::PretransformedAES)) {
    throw FormatError("MLCK: unknown transform kind " + std::to_string(kind));
  }
  m.descriptor.kind = static_cast<TransformKind>(kind);
  const auto nonce = r.bytes(16);
  std::memcpy(m.descriptor.nonce.data(), nonce.data(), 16);

  auto read_dtype = [&r]() {
    const auto tag = r.u8();
    const auto d = dtype_from_tag(tag);
    if (!d) throw FormatError("MLCK: unknown dtype tag " + std::to_string(tag));
    return *d;
  };

  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorSpec s;
    s.name = r.str16();
    s.dtype = read_dtype();
    s.shape.resize(r.u8());
    for (auto& d : s.shape) d = r.u64();
    m.descriptor.schema.push_back(std::move(s));
  }
  const auto meta_count = r.u32();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    auto k = r.str16();
    m.meta[k] = r.str32();
  }

  switch (r.u8()) {
    case kPreNone: break;
    case kPreGaussian: {
      GaussianPretransform g;
      g.mean = r.f64();
      g.stddev = r.f64();
      g.dtype = read_dtype();
      m.pretransform = g;
      break;
    }
    case kPreDenseLut: {
      const Dtype d = read_dtype();
      if (bit_width(d) > 16) throw FormatError("MLCK: dense table for a wide dtype");
      const std::size_t n = std::size_t{1} << bit_width(d);
      if (2 * 4 * n > r.remaining()) throw TruncatedError("MLCK: pre-transform table truncated");
      std::vector<std::uint32_t> fwd(n), inv(n);
      for (auto& v : fwd) v = r.u32();
      for (auto& v : inv) v = r.u32();
      m.pretransform = EmpiricalLut::from_dense(d, fwd, inv);
      break;
    }
    case kPreSparseLut: {
      EmpiricalLut lut;
      lut.dtype = read_dtype();
      const auto k = r.u32();
      if (std::uint64_t{8} * k > r.remaining()) throw TruncatedError("MLCK: pre-transform table truncated");
      lut.codes.resize(k);
      lut.starts.resize(k);
      for (std::uint32_t i = 0; i < k; ++i) {
        lut.codes[i] = r.u32();
        lut.starts[i] = r.u32();
        if (i > 0 && (lut.starts[i] <= lut.starts[i - 1] ||
                      order_key(lut.codes[i], lut.dtype) <= order_key(lut.codes[i - 1], lut.dtype))) {
          throw DescriptorError("MLCK: sparse pre-transform table is not monotone");
        }
      }
      if (k == 0 || lut.starts[0] != 0) throw DescriptorError("MLCK: sparse pre-transform table must start at 0");
      m.pretransform = std::move(lut);
      break;
    }
    default: throw FormatError("MLCK: unknown pre-transform block");
  }

  const auto integrity = r.bytes(32);
  std::memcpy(m.integrity.data(), integrity.data(), 32);
  const auto len = r.u64();
  if (len > r.remaining()) throw TruncatedError("MLCK: payload truncated");
  const auto payload = r.bytes(static_cast<std::size_t>(len));
  m.payload.assign(payload.begin(), payload.end());
  detail::check_trailer(file, r.position(), "MLCK");

  if (sha256(m.payload) != m.integrity) throw ChecksumError("MLCK: payload integrity mismatch");
  if (m.payload.size() != schema_byte_size(m.descriptor.schema)) {
    throw SchemaError("MLCK: payload length does not match schema");
  }
  if ((m.descriptor.kind == TransformKind::PretransformedAES) != m.pretransform.has_value()) {
    throw DescriptorError("MLCK: pre-transform block does not match the transform kind");
  }
  return m;
}

void save_locked(const LockedModel& locked, const std::string& path) {
  detail::write_file(path, serialize_locked(locked));
}

LockedModel load_locked(const std::string& path) { return deserialize_locked(detail::read_file(path)); }

}  // namespace mlock
