#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "config.hpp"

namespace aqsgee {

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  unsigned workers = 0;  // 0 = hardware concurrency; never affects output bytes
};

/// Exit status, human message for stderr (empty on success) and a JSON
/// summary. Library errors map to their ErrorCode; anything else is 1.
struct CommandResult {
  int exit_code = 0;
  std::string message;
  Json summary;
};

/// Runs `fit`, `diagnose`, `simulate` or `compare`. Never throws.
CommandResult run_command(std::string_view command, const CommandOptions& options);

}  // namespace aqsgee
