#include <memory>

#include "cli_support.hpp"
#include "commands.hpp"
#include "mlock/errors.hpp"

namespace mlock::cli {

namespace {

// Seeded runs derive the nonce from the seed and the plaintext so repeated
// invocations produce identical files.
std::optional<Nonce> seeded_nonce(const ParamStore& store) {
  if (!globals().seed) return std::nullopt;
  Bytes buf = {'m', 'l', 'o', 'c', 'k', '-', 'n', 'o', 'n', 'c', 'e'};
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(*globals().seed >> (8 * i)));
  const Digest body = sha256(flatten(store));
  buf.insert(buf.end(), body.begin(), body.end());
  const Digest d = sha256(buf);
  Nonce n{};
  std::copy_n(d.begin(), n.size(), n.begin());
  return n;
}

void add_fingerprint_command(CLI::App& app) {
  auto opts = std::make_shared<MeasureOptions>();
  auto method = std::make_shared<std::string>();
  auto* sub = app.add_subcommand("fingerprint", "Measure a hardware fingerprint");
  sub->add_option("--method", *method, "fingerprint source")
      ->required()
      ->check(CLI::IsMember({"clock", "fp", "puf"}));
  add_measure_options(sub, *opts);
  sub->callback([opts, method] {
    const Measured m = measure_fingerprint(*method, *opts);
    const EntropyEstimate est = entropy_estimate(m.fingerprint.method, opts->layers);
    if (globals().format == Format::Text) {
      std::cout << m.fingerprint.symbols << ' ' << m.fingerprint.entropy_bits << '\n';
      return;
    }
    json out;
    out["command"] = "fingerprint";
    out["method"] = std::string(method_name(m.fingerprint.method));
    out["symbols"] = m.fingerprint.symbols;
    out["entropy_bits"] = m.fingerprint.entropy_bits;
    out["entropy_upper_bound"] = est.upper_bound;
    out["entropy_theoretical"] = est.theoretical;
    for (const auto& [k, v] : m.extra.items()) out[k] = v;
    emit(out);
  });
}

struct LockArgs {
  std::string input;
  std::string out;
  std::string method = "aes";
  std::string pretransform = "empirical";
  FingerprintInput fp;
};

void add_lock_command(CLI::App& app) {
  auto a = std::make_shared<LockArgs>();
  auto* sub = app.add_subcommand("lock", "Hard-lock a parameter store to a fingerprint");
  sub->add_option("model", a->input, "input parameter store (MLPS)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out,-o", a->out, "output locked model (MLCK)")->required();
  sub->add_option("--method", a->method, "parameter transformation")
      ->check(CLI::IsMember({"aes", "shuffle", "pt-aes"}))
      ->capture_default_str();
  sub->add_option("--pretransform", a->pretransform, "pt-aes pre-transformation")
      ->check(CLI::IsMember({"gaussian", "empirical"}))
      ->capture_default_str();
  add_fingerprint_input(sub, a->fp);
  sub->callback([a] {
    const TransformKind kind = *parse_kind(a->method);
    const Fingerprint fp = resolve_fingerprint(a->fp);
    const ParamStore store = load_store(a->input);
    std::optional<PreTransform> pre;
    if (kind == TransformKind::PretransformedAES) {
      if (a->pretransform == "gaussian") {
        pre = fit_gaussian_pretransform(store);
      } else {
        pre = build_empirical_pretransform(store, bit_width(uniform_dtype(store)));
      }
    }
    const LockedModel locked = lock(store, derive_key(fp), kind, pre, seeded_nonce(store));
    save_locked(locked, a->out);
    json out;
    out["command"] = "lock";
    out["kind"] = std::string(kind_name(kind));
    out["fingerprint_method"] = std::string(method_name(fp.method));
    out["out"] = a->out;
    out["nonce"] = to_hex(locked.descriptor.nonce);
    out["payload_bytes"] = locked.payload.size();
    out["integrity"] = to_hex(locked.integrity);
    out["pretransform"] = pre ? a->pretransform : std::string("none");
    const auto sat = locked.meta.find("mlock.pretransform.saturated");
    out["saturated"] = sat == locked.meta.end() ? 0ull : std::stoull(sat->second);
    emit(out);
  });
}

struct UnlockArgs {
  std::string input;
  std::string out;
  FingerprintInput fp;
};

void add_unlock_command(CLI::App& app) {
  auto a = std::make_shared<UnlockArgs>();
  auto* sub = app.add_subcommand("unlock", "Recover a parameter store from a locked model");
  sub->add_option("locked", a->input, "locked model (MLCK)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out,-o", a->out, "output parameter store (MLPS)")->required();
  add_fingerprint_input(sub, a->fp);
  sub->callback([a] {
    const Fingerprint fp = resolve_fingerprint(a->fp);
    const LockedModel locked = load_locked(a->input);
    const ParamStore store = unlock(locked, derive_key(fp));
    save_store(store, a->out);
    json out;
    out["command"] = "unlock";
    out["kind"] = std::string(kind_name(locked.descriptor.kind));
    out["fingerprint_method"] = std::string(method_name(fp.method));
    out["out"] = a->out;
    out["tensors"] = store.size();
    out["parameters"] = store.total_count();
    out["sha256"] = to_hex(sha256(flatten(store)));
    emit(out);
  });
}

}  // namespace

void register_key_commands(CLI::App& app) {
  add_fingerprint_command(app);
  add_lock_command(app);
  add_unlock_command(app);
}

}  // namespace mlock::cli
