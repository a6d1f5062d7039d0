// mlock: command-line front end for the locking toolkit.
//
// Exit status: 0 success, 1 domain error, 2 usage error. Failures print a
// single "error: <Code>: <message>" line on stderr.

#include <cstdlib>
#include <iostream>

#include "cli_support.hpp"
#include "commands.hpp"
#include "mlock/errors.hpp"

namespace {

using namespace mlock::cli;

int fail(int status, const std::string& code, const std::string& msg) {
  std::cerr << "error: " << code << ": " << msg << '\n';
  return status;
}

// MLOCK_SEED wins over --seed so CI can pin every invocation at once.
void apply_seed_env(std::optional<std::uint64_t>& seed) {
  const char* env = std::getenv("MLOCK_SEED");
  if (env == nullptr || *env == '\0') return;
  try {
    std::size_t used = 0;
    const std::string s(env);
    const auto v = std::stoull(s, &used, 0);
    if (used != s.size()) throw std::invalid_argument(s);
    seed = v;
  } catch (const std::exception&) {
    throw UsageError("MLOCK_SEED is not an unsigned integer");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hardware-locking toolkit for neural network parameters", "mlock"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.set_config("--config", "", "read options from a TOML/INI file");

  Globals& g = globals();
  std::string format = "text";
  std::string level = "warn";
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "seed for every random choice (MLOCK_SEED overrides)");
  auto* fmt = app.add_option("--format", format, "output format")->check(CLI::IsMember({"text", "json", "csv"}));
  app.add_flag("--json", "shorthand for --format json")->excludes(fmt);
  app.add_option("--log-level", level, "stderr verbosity")->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  // Globals must be in place before any subcommand callback runs.
  app.parse_complete_callback([&] {
    g.format = app.count("--json") > 0 ? Format::Json
               : format == "json"      ? Format::Json
               : format == "csv"       ? Format::Csv
                                       : Format::Text;
    g.log_level = level == "error"  ? LogLevel::Error
                  : level == "info" ? LogLevel::Info
                  : level == "debug" ? LogLevel::Debug
                                     : LogLevel::Warn;
    g.seed = seed;
    apply_seed_env(g.seed);
  });

  register_key_commands(app);
  register_model_commands(app);
  register_analysis_commands(app);

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    return fail(2, "UsageError", e.what());
  } catch (const UsageError& e) {
    return fail(2, "UsageError", e.what());
  } catch (const mlock::InvalidArgument& e) {
    return fail(2, e.code(), e.what());
  } catch (const mlock::Error& e) {
    return fail(1, e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(1, "InternalError", e.what());
  }
}
