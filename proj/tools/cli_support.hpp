#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlock/fingerprint.hpp"
#include "mlock/param_store.hpp"
#include "mlock/tinynet.hpp"
#include "mlock/transform.hpp"

namespace mlock::cli {

using json = nlohmann::ordered_json;

enum class Format { Text, Json, Csv };
enum class LogLevel { Error, Warn, Info, Debug };

struct Globals {
  std::optional<std::uint64_t> seed;  // after MLOCK_SEED override
  Format format = Format::Text;
  LogLevel log_level = LogLevel::Warn;

  std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
};

Globals& globals();
void log(LogLevel level, const std::string& msg);

// Thrown for flag combinations CLI11 cannot check on its own (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Output

// Renders a command result. Text and CSV use `curve` (array of flat
// objects) as a table when present, otherwise one key/value per line.
void emit(const json& result);

// ---------------------------------------------------------------------------
// Fingerprint sources shared by lock, unlock and fingerprint.

struct MeasureOptions {
  std::uint64_t iters = 1u << 20;
  unsigned trials = 31;
  std::uint64_t divisor = 1u << 16;
  unsigned layers = 8;
  unsigned width = 256;
  std::string dtype = "fp32";
  std::string order = "forward";
  std::string puf_file;
  double puf_error = kDefaultPufErrorRate;
  unsigned repetition = 9;
  std::string helper;
  std::uint64_t read_index = 1;
};

struct FingerprintInput {
  std::string hex;
  std::string method;
  std::string measure;
  std::string command;
  MeasureOptions opts;
};

void add_measure_options(CLI::App* app, MeasureOptions& m);
void add_fingerprint_input(CLI::App* app, FingerprintInput& in);

struct Measured {
  Fingerprint fingerprint;
  json extra = json::object();
};

Measured measure_fingerprint(const std::string& method, const MeasureOptions& m);
Fingerprint resolve_fingerprint(const FingerprintInput& in);

// ---------------------------------------------------------------------------
// Files

enum class FileKind { Store, Locked };
FileKind sniff(const std::string& path);

// Blob task regenerated from the store metadata written by `train`, with an
// optional seed override.
BlobTask task_for(const ParamStore::Meta& meta, std::optional<std::uint64_t> data_seed);

Dtype parse_dtype_flag(const std::string& name);
json schema_json(const Schema& schema);

}  // namespace mlock::cli
