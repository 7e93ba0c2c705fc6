#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "run_config.hpp"

namespace e2edet::cli {

struct KeySpec {
  std::string name;
  std::string default_value;  // empty + required = must be supplied
  std::string help;
  bool required = false;
};

struct CommandSpec {
  std::string name;
  std::string help;
  std::vector<KeySpec> keys;
};

const std::vector<CommandSpec>& command_specs();

/// Throws ValidationError for unknown commands.
const CommandSpec& command_spec(std::string_view name);

/// Applies defaults, rejects unknown keys and reports missing required ones.
/// A `command` key, as written into run_config.txt, must match the command.
RunConfig resolve(const CommandSpec& spec, const RunConfig& given);

/// Runs a resolved command. Returns the process exit code; validation and I/O
/// problems are thrown as ValidationError / IoError.
int run_command(const CommandSpec& spec, const RunConfig& cfg, std::ostream& out,
                std::ostream& err);

/// 0 ok, 1 validation, 2 I/O.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

}  // namespace e2edet::cli
