#include "cli_support.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "mlock/errors.hpp"

namespace mlock::cli {

Globals& globals() {
  static Globals g;
  return g;
}

void log(LogLevel level, const std::string& msg) {
  if (level > globals().log_level) return;
  static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
  std::cerr << '[' << kNames[static_cast<int>(level)] << "] " << msg << '\n';
}

namespace {

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

bool is_scalar(const json& v) { return !v.is_array() && !v.is_object(); }

void write_table(const json& rows, char sep) {
  if (rows.empty()) return;
  bool first = true;
  for (const auto& [k, _] : rows.front().items()) {
    std::cout << (first ? "" : std::string(1, sep)) << k;
    first = false;
  }
  std::cout << '\n';
  for (const auto& row : rows) {
    first = true;
    for (const auto& [_, v] : row.items()) {
      std::cout << (first ? "" : std::string(1, sep)) << scalar_text(v);
      first = false;
    }
    std::cout << '\n';
  }
}

}  // namespace

void emit(const json& result) {
  switch (globals().format) {
    case Format::Json:
      std::cout << result.dump(2) << '\n';
      return;
    case Format::Csv:
      if (result.contains("curve")) {
        write_table(result["curve"], ',');
      } else {
        std::cout << "key,value\n";
        for (const auto& [k, v] : result.items()) {
          if (is_scalar(v)) std::cout << k << ',' << scalar_text(v) << '\n';
        }
      }
      return;
    case Format::Text:
      for (const auto& [k, v] : result.items()) {
        if (is_scalar(v)) std::cout << k << ": " << scalar_text(v) << '\n';
      }
      if (result.contains("curve")) write_table(result["curve"], ' ');
      return;
  }
}

// ---------------------------------------------------------------------------

void add_measure_options(CLI::App* app, MeasureOptions& m) {
  app->add_option("--iters", m.iters, "clock: dependent additions per trial")->capture_default_str();
  app->add_option("--trials", m.trials, "clock: trials in the majority vote")->capture_default_str();
  app->add_option("--divisor", m.divisor, "clock: tick quantization step")->capture_default_str();
  app->add_option("--layers", m.layers, "fp: chain depth")->capture_default_str();
  app->add_option("--width", m.width, "fp: layer width")->capture_default_str();
  app->add_option("--fp-dtype", m.dtype, "fp: arithmetic format")
      ->check(CLI::IsMember({"fp32", "fp16", "minifloat16", "minifloat8"}))
      ->capture_default_str();
  app->add_option("--order", m.order, "fp: accumulation order")
      ->check(CLI::IsMember({"forward", "reversed"}))
      ->capture_default_str();
  app->add_option("--puf-file", m.puf_file, "puf: raw start-up dump (synthetic source when absent)");
  app->add_option("--puf-error", m.puf_error, "puf: synthetic bit error rate")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--rep", m.repetition, "puf: repetition code length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--helper", m.helper, "puf: helper data file (reproduce if present, else enrol and write)");
  app->add_option("--read-index", m.read_index, "puf: synthetic read number used to reproduce")
      ->capture_default_str();
}

void add_fingerprint_input(CLI::App* app, FingerprintInput& in) {
  auto* hex = app->add_option("--fingerprint", in.hex, "fingerprint symbols (hex)");
  auto* method = app->add_option("--fingerprint-method", in.method, "method of an inline fingerprint")
                     ->check(CLI::IsMember({"clock", "fp", "puf", "composite"}));
  auto* measure = app->add_option("--measure", in.measure, "measure the fingerprint on this machine")
                      ->check(CLI::IsMember({"clock", "fp", "puf"}));
  auto* cmd = app->add_option("--fingerprint-cmd", in.command, "shell command printing the fingerprint hex");
  hex->excludes(measure)->excludes(cmd);
  measure->excludes(cmd);
  method->excludes(measure);
  add_measure_options(app, in.opts);
}

namespace {

FuzzyHelper read_helper(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open helper file '" + path + "'");
  json j;
  try {
    in >> j;
    FuzzyHelper h;
    h.repetition = j.at("repetition").get<unsigned>();
    h.helper_data = from_hex(j.at("helper_data").get<std::string>());
    const Bytes check = from_hex(j.at("key_check").get<std::string>());
    if (check.size() != h.key_check.size()) throw FormatError("key_check must be 8 bytes");
    std::copy(check.begin(), check.end(), h.key_check.begin());
    return h;
  } catch (const json::exception& e) {
    throw FormatError("helper file '" + path + "': " + e.what());
  }
}

void write_helper(const std::string& path, const FuzzyHelper& h) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open helper file '" + path + "' for writing");
  json j;
  j["repetition"] = h.repetition;
  j["helper_data"] = to_hex(h.helper_data);
  j["key_check"] = to_hex(h.key_check);
  out << j.dump(2) << '\n';
}

BitVector puf_bits(const MeasureOptions& m, std::size_t bits, std::uint64_t read_index) {
  if (!m.puf_file.empty()) return puf_read_file(m.puf_file, bits);
  return SyntheticPuf(globals().seed_or(0), m.puf_error).read(bits, read_index);
}

Measured measure_puf(const MeasureOptions& m) {
  const std::size_t bits = kFuzzyKeyBits * m.repetition;
  Measured out;
  Key256 key{};
  const bool reproduce = !m.helper.empty() && std::filesystem::exists(m.helper);
  if (reproduce) {
    const FuzzyHelper helper = read_helper(m.helper);
    key = fuzzy_rep(puf_bits(m, kFuzzyKeyBits * helper.repetition, m.read_index), helper);
    out.extra["puf_mode"] = "reproduce";
  } else {
    std::optional<Key256> secret;
    if (globals().seed) {
      // Pinned codeword so seeded enrolment is repeatable.
      Bytes buf = {'m', 'l', 'o', 'c', 'k', '-', 'p', 'u', 'f'};
      for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(*globals().seed >> (8 * i)));
      secret = sha256(buf);
    }
    const FuzzyEnrollment e = fuzzy_gen(puf_bits(m, bits, 0), m.repetition, secret);
    key = e.key;
    if (m.helper.empty()) {
      log(LogLevel::Warn, "no --helper given; enrolment helper data discarded");
    } else {
      write_helper(m.helper, e.helper);
    }
    out.extra["puf_mode"] = "enrol";
  }
  out.extra["puf_source"] = m.puf_file.empty() ? "synthetic" : "file";
  out.fingerprint = Fingerprint{FingerprintMethod::PUF, to_hex(key), entropy_estimate(FingerprintMethod::PUF).bits};
  return out;
}

}  // namespace

Measured measure_fingerprint(const std::string& method, const MeasureOptions& m) {
  Measured out;
  if (method == "clock") {
    ClockOptions opts;
    opts.divisor = m.divisor;
    out.fingerprint = clock_fingerprint(m.iters, m.trials, opts);
  } else if (method == "fp") {
    FinitePrecisionConfig cfg;
    cfg.seed = globals().seed_or(0);
    cfg.layers = m.layers;
    cfg.width = m.width;
    cfg.dtype = parse_dtype_flag(m.dtype);
    cfg.order = m.order == "reversed" ? AccumulationOrder::Reversed : AccumulationOrder::Forward;
    out.fingerprint = finite_precision_fingerprint(cfg);
  } else if (method == "puf") {
    out = measure_puf(m);
  } else {
    throw UsageError("unknown fingerprint method '" + method + "'");
  }
  return out;
}

namespace {

std::string run_command(const std::string& command) {
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(command.c_str(), "r"), pclose);
  if (!pipe) throw CapabilityError("cannot run fingerprint command");
  std::string out;
  char buf[256];
  while (std::fgets(buf, sizeof buf, pipe.get()) != nullptr) out += buf;
  const int status = pclose(pipe.release());
  if (status != 0) throw CapabilityError("fingerprint command exited with status " + std::to_string(status));
  return out;
}

Fingerprint from_hex_string(std::string hex, const std::string& method_flag) {
  for (auto& c : hex) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  FingerprintMethod method = FingerprintMethod::Composite;
  if (!method_flag.empty()) {
    method = *parse_method(method_flag);
  } else if (hex.size() == kClockSymbols) {
    method = FingerprintMethod::Clock;
  } else if (hex.size() == 64) {
    method = FingerprintMethod::FinitePrecision;
  }
  const unsigned ceiling = static_cast<unsigned>(4 * hex.size());
  Fingerprint fp{method, hex, std::min(entropy_estimate(method).bits, ceiling)};
  validate(fp);
  return fp;
}

}  // namespace

Fingerprint resolve_fingerprint(const FingerprintInput& in) {
  if (!in.hex.empty()) return from_hex_string(in.hex, in.method);
  if (!in.measure.empty()) return measure_fingerprint(in.measure, in.opts).fingerprint;
  if (!in.command.empty()) {
    const std::string out = run_command(in.command);
    const auto b = out.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) throw InvalidArgument("fingerprint command printed nothing");
    const auto e = out.find_first_of(" \t\r\n", b);
    return from_hex_string(out.substr(b, e == std::string::npos ? std::string::npos : e - b), in.method);
  }
  throw UsageError("one of --fingerprint, --measure or --fingerprint-cmd is required");
}

// ---------------------------------------------------------------------------

FileKind sniff(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "' for reading");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::string(magic, 4) == "MLPS") return FileKind::Store;
  if (in.gcount() == 4 && std::string(magic, 4) == "MLCK") return FileKind::Locked;
  throw FormatError("'" + path + "' is neither a parameter store nor a locked model");
}

BlobTask task_for(const ParamStore::Meta& meta, std::optional<std::uint64_t> data_seed) {
  BlobConfig cfg;
  auto num = [&](const char* key, auto fallback) -> decltype(fallback) {
    const auto it = meta.find(key);
    if (it == meta.end()) return fallback;
    try {
      return static_cast<decltype(fallback)>(std::stoull(it->second));
    } catch (const std::exception&) {
      throw FormatError(std::string("metadata '") + key + "' is not a number");
    }
  };
  cfg.seed = data_seed ? *data_seed : num("data.seed", std::uint64_t{0});
  cfg.train_size = num("data.train_size", cfg.train_size);
  cfg.test_size = num("data.test_size", cfg.test_size);
  cfg.classes = num("classes", cfg.classes);
  return make_blobs(cfg);
}

Dtype parse_dtype_flag(const std::string& name) {
  const auto d = parse_dtype(name);
  if (!d) throw UsageError("unknown dtype '" + name + "'");
  return *d;
}

json schema_json(const Schema& schema) {
  json out = json::array();
  for (const auto& t : schema) {
    out.push_back({{"name", t.name}, {"dtype", std::string(dtype_name(t.dtype))}, {"shape", t.shape}});
  }
  return out;
}

}  // namespace mlock::cli
