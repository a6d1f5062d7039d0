#pragma once

#include <CLI11.hpp>

namespace mlock::cli {

// Each adds its subcommands to `app`; the callbacks do the work.
void register_key_commands(CLI::App& app);       // fingerprint, lock, unlock
void register_model_commands(CLI::App& app);     // train, eval, softlock, attack, bench
void register_analysis_commands(CLI::App& app);  // crack, stats

}  // namespace mlock::cli
