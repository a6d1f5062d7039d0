#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mlock/crypto.hpp"
#include "mlock/dtype.hpp"

namespace mlock {

using Shape = std::vector<std::uint64_t>;

std::uint64_t element_count(const Shape& shape) noexcept;

// One named tensor; `data` holds count * byte_width(dtype) little-endian bytes
// in row-major order.
struct ParamTensor {
  std::string name;
  Shape shape;
  Dtype dtype = Dtype::FP32;
  Bytes data;

  std::uint64_t count() const noexcept { return element_count(shape); }
  std::size_t byte_size() const noexcept { return static_cast<std::size_t>(count()) * byte_width(dtype); }

  // Raw code of element i (little-endian load of byte_width bytes).
  std::uint32_t code(std::size_t i) const noexcept;
  void set_code(std::size_t i, std::uint32_t code) noexcept;

  bool operator==(const ParamTensor&) const = default;
};

struct TensorSpec {
  std::string name;
  Shape shape;
  Dtype dtype = Dtype::FP32;

  bool operator==(const TensorSpec&) const = default;
};

using Schema = std::vector<TensorSpec>;

std::size_t schema_byte_size(const Schema& schema) noexcept;

// Ordered collection of parameter tensors plus string metadata. Tensor order
// is insertion order and is part of the store's identity.
class ParamStore {
 public:
  using Meta = std::map<std::string, std::string>;

  ParamStore() = default;

  // Throws SchemaError on duplicate names or data/shape mismatch.
  void add(ParamTensor tensor);
  void add_fp32(std::string name, Shape shape, std::span<const float> values);

  const std::vector<ParamTensor>& tensors() const noexcept { return tensors_; }
  std::vector<ParamTensor>& mutable_tensors() noexcept { return tensors_; }
  const ParamTensor& tensor(std::size_t i) const { return tensors_.at(i); }
  const ParamTensor* find(const std::string& name) const noexcept;
  std::size_t size() const noexcept { return tensors_.size(); }
  bool empty() const noexcept { return tensors_.empty(); }
  std::uint64_t total_count() const noexcept;

  Meta& meta() noexcept { return meta_; }
  const Meta& meta() const noexcept { return meta_; }

  Schema schema() const;

  // Decoded values of tensor i (INT8 uses the tensor's affine params from meta).
  std::vector<float> values(std::size_t i) const;
  std::vector<float> all_values() const;
  AffineParams affine(const std::string& tensor_name) const;
  void set_affine(const std::string& tensor_name, const AffineParams& p);

  bool operator==(const ParamStore&) const = default;

 private:
  std::vector<ParamTensor> tensors_;
  Meta meta_;
};

// Concatenation of tensor buffers in declared order; no header.
Bytes flatten(const ParamStore& store);

// Inverse of flatten for a given schema. Throws SchemaError when the byte
// count does not match the schema exactly. The result carries no metadata.
ParamStore unflatten(ByteSpan bytes, const Schema& schema);

// MLPS container: magic "MLPS", u16 version, u32 tensor count, tensors,
// metadata block, SHA-256 trailer.
inline constexpr std::uint16_t kStoreFormatVersion = 1;

Bytes serialize_store(const ParamStore& store);
ParamStore deserialize_store(ByteSpan file);
void save_store(const ParamStore& store, const std::string& path);
ParamStore load_store(const std::string& path);

}  // namespace mlock
