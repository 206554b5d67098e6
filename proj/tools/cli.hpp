#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dora/experiment.hpp"

namespace dora::cli {

// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,  // I/O failures and deliberate interruption (--stop-after)
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitVerify = 4,
};

enum class SeedSource { kConfig, kEnvironment, kFlag };
std::string_view to_string(SeedSource s);

struct ResolvedConfig {
  ExperimentConfig config;  // seed and output_dir already overridden
  SeedSource seed_source = SeedSource::kConfig;
  std::string hash;
};

// Loads the config file (or defaults when `path` is empty) and applies overrides with
// precedence flag > DORA_LAB_SEED > config.
ResolvedConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed_flag,
                              const std::optional<std::string>& out_flag);

// Entry point shared by the executable and the tests. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dora::cli
