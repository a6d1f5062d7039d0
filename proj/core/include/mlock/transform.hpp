#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "mlock/crypto.hpp"
#include "mlock/param_store.hpp"
#include "mlock/pretransform.hpp"

namespace mlock {

enum class TransformKind : std::uint8_t {
  AES = 0,
  Shuffle = 1,
  PretransformedAES = 2,
};

std::string_view kind_name(TransformKind k) noexcept;  // "aes", "shuffle", "pt-aes"
std::optional<TransformKind> parse_kind(std::string_view name) noexcept;

// Public description of how a payload was produced. The nonce is all zeros
// for Shuffle, which is keyed by the key alone.
struct TransformDescriptor {
  TransformKind kind = TransformKind::AES;
  Nonce nonce{};
  Schema schema;

  bool operator==(const TransformDescriptor&) const = default;
};

struct LockedModel {
  TransformDescriptor descriptor;
  Bytes payload;
  std::optional<PreTransform> pretransform;  // set iff kind == PretransformedAES
  ParamStore::Meta meta;                     // store meta plus "mlock.*" lock annotations
  Digest integrity{};                        // SHA-256 of payload

  bool operator==(const LockedModel&) const = default;
};

// Meta keys with this prefix describe the lock itself and are dropped on unlock.
inline constexpr std::string_view kLockMetaPrefix = "mlock.";

// Random nonces come from the system RNG unless one is supplied.
LockedModel aes_lock(const ParamStore& store, const Key256& key, std::optional<Nonce> nonce = std::nullopt);
ParamStore aes_unlock(const LockedModel& locked, const Key256& key);

LockedModel shuffle_lock(const ParamStore& store, const Key256& key);
ParamStore shuffle_unlock(const LockedModel& locked, const Key256& key);

// Requires a single dtype across the store. Gaussian mode records how many
// values saturated under "mlock.pretransform.saturated".
LockedModel pretransformed_aes_lock(const ParamStore& store, const Key256& key, const PreTransform& pre,
                                    std::optional<Nonce> nonce = std::nullopt);
ParamStore pretransformed_aes_unlock(const LockedModel& locked, const Key256& key);

LockedModel lock(const ParamStore& store, const Key256& key, TransformKind kind,
                 const std::optional<PreTransform>& pre = std::nullopt, std::optional<Nonce> nonce = std::nullopt);
// Any key yields a schema-valid store; wrong keys are not detected.
ParamStore unlock(const LockedModel& locked, const Key256& key);

// In-place keyed permutation of element codes, global within each dtype
// group. Exposed for tests and benchmarks.
void shuffle_values(ParamStore& store, const Key256& key);
void unshuffle_values(ParamStore& store, const Key256& key);

// MLCK container.
inline constexpr std::uint16_t kLockedFormatVersion = 1;

Bytes serialize_locked(const LockedModel& locked);
LockedModel deserialize_locked(ByteSpan file);
void save_locked(const LockedModel& locked, const std::string& path);
LockedModel load_locked(const std::string& path);

}  // namespace mlock
