#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <string>

#include "commands.hpp"
#include "e2edet/error.hpp"

namespace {

std::string dashed(std::string key) {
  for (char& ch : key) {
    if (ch == '_') ch = '-';
  }
  return key;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace e2edet::cli;

  CLI::App app{"e2edet: label assignment, 3D max filtering, NMS and COCO-style evaluation"};
  app.require_subcommand(1);

  struct Bound {
    CLI::App* sub = nullptr;
    std::string config_path;
    std::map<std::string, std::string> flags;
    std::map<std::string, CLI::Option*> options;
  };
  std::map<std::string, Bound> bound;
  for (const CommandSpec& spec : command_specs()) {
    Bound& b = bound[spec.name];
    b.sub = app.add_subcommand(spec.name, spec.help);
    b.sub->add_option("--config", b.config_path, "key = value file; flags override it");
    for (const KeySpec& k : spec.keys) {
      std::string help = k.help;
      if (k.required) {
        help += " (required)";
      } else if (!k.default_value.empty()) {
        help += " [" + k.default_value + "]";
      }
      b.options[k.name] = b.sub->add_option("--" + dashed(k.name), b.flags[k.name], help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  for (const CommandSpec& spec : command_specs()) {
    Bound& b = bound[spec.name];
    if (!b.sub->parsed()) continue;
    try {
      RunConfig given;
      if (!b.config_path.empty()) given = RunConfig::load(b.config_path);
      for (const auto& [key, opt] : b.options) {
        if (opt->count() > 0) given.set(key, b.flags[key]);
      }
      return run_command(spec, resolve(spec, given), std::cout, std::cerr);
    } catch (const e2edet::IoError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitIo;
    } catch (const e2edet::ValidationError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitValidation;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitValidation;
    }
  }
  return kExitValidation;
}
