#include "mlock/pretransform.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/special_functions/erf.hpp>

#include "mlock/errors.hpp"

namespace mlock {

namespace {
__extension__ typedef unsigned __int128 u128;
}  // namespace

double gaussian_cdf(double x, double mean, double stddev) {
  if (!(stddev > 0.0)) throw InvalidArgument("gaussian_cdf needs stddev > 0");
  return 0.5 * std::erfc(-(x - mean) / (stddev * std::sqrt(2.0)));
}

double gaussian_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("gaussian_quantile needs p in (0, 1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

Dtype uniform_dtype(const ParamStore& store) {
  if (store.empty()) throw DescriptorError("pre-transform needs a non-empty store");
  const Dtype d = store.tensor(0).dtype;
  for (const auto& t : store.tensors()) {
    if (t.dtype != d) throw DescriptorError("pre-transform needs a single dtype across all tensors");
  }
  return d;
}

// ---------------------------------------------------------------------------

std::optional<std::pair<std::uint64_t, std::uint64_t>> EmpiricalLut::interval(std::uint32_t code) const {
  const std::uint32_t key = order_key(code, dtype);
  auto it = std::lower_bound(codes.begin(), codes.end(), key,
                             [this](std::uint32_t c, std::uint32_t k) { return order_key(c, dtype) < k; });
  if (it == codes.end() || *it != code) return std::nullopt;
  const auto i = static_cast<std::size_t>(it - codes.begin());
  return std::make_pair(starts[i], width(i));
}

std::uint32_t EmpiricalLut::decode(std::uint64_t uniform) const {
  auto it = std::upper_bound(starts.begin(), starts.end(), uniform);
  return codes[static_cast<std::size_t>(it - starts.begin()) - 1];
}

std::vector<std::uint32_t> EmpiricalLut::dense_forward() const {
  if (bits() > 16) throw CapacityError("dense LUT tables are limited to 16-bit codes");
  const std::uint32_t n = 1u << bits();
  std::vector<std::uint32_t> fwd(n);
  // Walk dtype codes in value order; absent codes take the start of the next
  // present code so the table stays monotone.
  std::size_t next = 0;
  for (std::uint32_t key = 0; key < n; ++key) {
    const std::uint32_t code = code_from_order_key(key, dtype);
    while (next < codes.size() && order_key(codes[next], dtype) < key) ++next;
    fwd[code] = next < codes.size() ? static_cast<std::uint32_t>(starts[next]) : n - 1;
  }
  return fwd;
}

std::vector<std::uint32_t> EmpiricalLut::dense_inverse() const {
  if (bits() > 16) throw CapacityError("dense LUT tables are limited to 16-bit codes");
  std::vector<std::uint32_t> inv(static_cast<std::size_t>(slot_count()));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    std::fill_n(inv.begin() + static_cast<std::ptrdiff_t>(starts[i]), width(i), codes[i]);
  }
  return inv;
}

EmpiricalLut EmpiricalLut::from_dense(Dtype dtype, const std::vector<std::uint32_t>& forward,
                                      const std::vector<std::uint32_t>& inverse) {
  EmpiricalLut lut;
  lut.dtype = dtype;
  const std::size_t n = std::size_t{1} << bit_width(dtype);
  if (forward.size() != n || inverse.size() != n) throw DescriptorError("LUT tables have the wrong size");
  for (std::size_t u = 0; u < n; ++u) {
    if (inverse[u] >= n) throw DescriptorError("LUT inverse entry out of range");
    if (u == 0 || inverse[u] != inverse[u - 1]) {
      if (!lut.codes.empty() && order_key(inverse[u], dtype) <= order_key(lut.codes.back(), dtype)) {
        throw DescriptorError("LUT inverse table is not monotone");
      }
      lut.codes.push_back(inverse[u]);
      lut.starts.push_back(u);
    }
  }
  for (std::size_t i = 0; i < lut.codes.size(); ++i) {
    if (forward[lut.codes[i]] != lut.starts[i]) throw DescriptorError("LUT forward and inverse tables disagree");
  }
  return lut;
}

EmpiricalLut build_empirical_pretransform(const ParamStore& store, unsigned precision_bits) {
  if (precision_bits > 32) throw CapacityError("pre-transform precision above 32 bits is not supported");
  const Dtype dtype = uniform_dtype(store);
  if (precision_bits != bit_width(dtype)) {
    throw InvalidArgument("pre-transform precision must equal the dtype width (" + std::to_string(bit_width(dtype)) +
                          " bits)");
  }
  // (order key, count) of every present code, ascending in value order.
  std::vector<std::pair<std::uint32_t, std::uint64_t>> present;
  std::uint64_t total = 0;
  if (precision_bits <= 16) {
    std::vector<std::uint64_t> hist(std::size_t{1} << precision_bits, 0);
    for (const auto& t : store.tensors()) {
      for (std::size_t i = 0; i < t.count(); ++i) ++hist[order_key(t.code(i), dtype)];
    }
    for (std::uint32_t k = 0; k < hist.size(); ++k) {
      if (hist[k] != 0) present.emplace_back(k, hist[k]);
    }
  } else {
    std::vector<std::uint32_t> keys;
    keys.reserve(static_cast<std::size_t>(store.total_count()));
    for (const auto& t : store.tensors()) {
      for (std::size_t i = 0; i < t.count(); ++i) keys.push_back(order_key(t.code(i), dtype));
    }
    std::sort(keys.begin(), keys.end());
    for (std::size_t i = 0; i < keys.size();) {
      std::size_t j = i;
      while (j < keys.size() && keys[j] == keys[i]) ++j;
      present.emplace_back(keys[i], j - i);
      i = j;
    }
  }
  for (const auto& p : present) total += p.second;
  if (total == 0) throw InvalidArgument("cannot build a pre-transform from an empty store");

  const std::uint64_t slots = std::uint64_t{1} << precision_bits;
  const std::size_t k = present.size();
  EmpiricalLut lut;
  lut.dtype = dtype;
  lut.codes.resize(k);
  lut.starts.resize(k);
  u128 cum = 0;
  for (std::size_t i = 0; i < k; ++i) {
    lut.codes[i] = code_from_order_key(present[i].first, dtype);
    auto target = static_cast<std::uint64_t>(cum * slots / total);
    if (i > 0) target = std::max(target, lut.starts[i - 1] + 1);
    lut.starts[i] = target;
    cum += present[i].second;
  }
  // Every present code keeps at least one slot: pull starts back from the top.
  std::uint64_t limit = slots;
  for (std::size_t i = k; i-- > 0;) {
    lut.starts[i] = std::min(lut.starts[i], limit - 1);
    limit = lut.starts[i];
  }
  return lut;
}

GaussianPretransform fit_gaussian_pretransform(const ParamStore& store) {
  const Dtype dtype = uniform_dtype(store);
  if (dtype == Dtype::INT8) throw DescriptorError("Gaussian pre-transform needs a floating-point dtype");
  double sum = 0.0;
  double sq = 0.0;
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (float v : store.values(i)) {
      if (!std::isfinite(v)) continue;
      sum += v;
      sq += static_cast<double>(v) * v;
      ++n;
    }
  }
  if (n < 2) throw DescriptorError("Gaussian pre-transform needs at least two finite values");
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(sq / static_cast<double>(n) - mean * mean, 0.0);
  const double sd = std::sqrt(var);
  return GaussianPretransform{mean, sd > 0.0 ? sd : 1.0, dtype};
}

// ---------------------------------------------------------------------------

namespace {

void put_code(Bytes& out, std::size_t index, std::size_t width, std::uint64_t code) {
  for (std::size_t b = 0; b < width; ++b) out[index * width + b] = static_cast<std::uint8_t>(code >> (8 * b));
}

std::uint64_t get_code(ByteSpan in, std::size_t index, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(in[index * width + b]) << (8 * b);
  return v;
}

struct LutEncoder {
  const EmpiricalLut& lut;
  std::vector<std::int64_t> dense_index;  // code -> index into lut.codes, bits <= 16 only

  explicit LutEncoder(const EmpiricalLut& l) : lut(l) {
    if (lut.bits() <= 16) {
      dense_index.assign(static_cast<std::size_t>(lut.slot_count()), -1);
      for (std::size_t i = 0; i < lut.codes.size(); ++i) dense_index[lut.codes[i]] = static_cast<std::int64_t>(i);
    }
  }

  std::size_t index_of(std::uint32_t code) const {
    if (!dense_index.empty()) {
      const auto i = dense_index[code];
      if (i < 0) throw DescriptorError("value code absent from the pre-transform table");
      return static_cast<std::size_t>(i);
    }
    const std::uint32_t key = order_key(code, lut.dtype);
    auto it = std::lower_bound(lut.codes.begin(), lut.codes.end(), key,
                               [this](std::uint32_t c, std::uint32_t k) { return order_key(c, lut.dtype) < k; });
    if (it == lut.codes.end() || *it != code) throw DescriptorError("value code absent from the pre-transform table");
    return static_cast<std::size_t>(it - lut.codes.begin());
  }
};

}  // namespace

Bytes pretransform_encode(const ParamStore& store, const PreTransform& pre, std::uint64_t dither_seed,
                          EncodeStats* stats) {
  const Dtype dtype = uniform_dtype(store);
  const std::size_t width = byte_width(dtype);
  Bytes out(static_cast<std::size_t>(store.total_count()) * width);
  EncodeStats local;
  std::size_t idx = 0;

  if (const auto* lut = std::get_if<EmpiricalLut>(&pre)) {
    if (lut->dtype != dtype) throw DescriptorError("pre-transform dtype does not match the store");
    LutEncoder enc(*lut);
    std::mt19937_64 rng(dither_seed);
    for (const auto& t : store.tensors()) {
      for (std::size_t i = 0; i < t.count(); ++i, ++idx) {
        const std::size_t k = enc.index_of(t.code(i));
        const std::uint64_t w = lut->width(k);
        const std::uint64_t off = w > 1 ? std::uniform_int_distribution<std::uint64_t>(0, w - 1)(rng) : 0;
        put_code(out, idx, width, lut->starts[k] + off);
      }
    }
  } else {
    const auto& g = std::get<GaussianPretransform>(pre);
    if (g.dtype != dtype) throw DescriptorError("pre-transform dtype does not match the store");
    const double slots = std::ldexp(1.0, static_cast<int>(g.bits()));
    const auto top = static_cast<std::uint64_t>(slots) - 1;
    for (std::size_t ti = 0; ti < store.size(); ++ti) {
      for (float v : store.values(ti)) {
        std::uint64_t code;
        if (std::isnan(v)) {
          code = (top + 1) / 2;
          ++local.saturated;
        } else {
          const double scaled = std::floor(gaussian_cdf(v, g.mean, g.stddev) * slots);
          code = scaled <= 0.0 ? 0 : std::min(static_cast<std::uint64_t>(scaled), top);
          if (code == 0 || code == top) ++local.saturated;
        }
        put_code(out, idx++, width, code);
      }
    }
  }
  if (stats != nullptr) *stats = local;
  return out;
}

ParamStore pretransform_decode(ByteSpan codes, const Schema& schema, const PreTransform& pre) {
  if (codes.size() != schema_byte_size(schema)) throw SchemaError("pre-transformed stream does not match schema");
  if (schema.empty()) return ParamStore{};
  const Dtype dtype = schema.front().dtype;
  for (const auto& s : schema) {
    if (s.dtype != dtype) throw DescriptorError("pre-transform needs a single dtype across all tensors");
  }
  const std::size_t width = byte_width(dtype);
  const std::size_t n = codes.size() / width;
  Bytes plain(codes.size());

  if (const auto* lut = std::get_if<EmpiricalLut>(&pre)) {
    if (lut->dtype != dtype) throw DescriptorError("pre-transform dtype does not match the schema");
    if (lut->bits() <= 16) {
      const auto inv = lut->dense_inverse();
      for (std::size_t i = 0; i < n; ++i) put_code(plain, i, width, inv[get_code(codes, i, width)]);
    } else {
      for (std::size_t i = 0; i < n; ++i) put_code(plain, i, width, lut->decode(get_code(codes, i, width)));
    }
  } else {
    const auto& g = std::get<GaussianPretransform>(pre);
    if (g.dtype != dtype) throw DescriptorError("pre-transform dtype does not match the schema");
    const double slots = std::ldexp(1.0, static_cast<int>(g.bits()));
    for (std::size_t i = 0; i < n; ++i) {
      const double p = (static_cast<double>(get_code(codes, i, width)) + 0.5) / slots;
      const double x = g.mean + g.stddev * gaussian_quantile(p);
      put_code(plain, i, width, encode_value(x, dtype));
    }
  }
  return unflatten(plain, schema);
}

}  // namespace mlock
