// Batch front-end. All work happens behind the C API; this file only parses
// flags and relays the exit status.
//
// Exit codes: 0 ok, 1 internal, 2 load, 3 not converged (files written),
// 4 singular, 5 invalid argument, 6 config, 7 overflow, 8 unsupported, 9 io.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "aqsgee/aqsgee.h"

int main(int argc, char** argv) {
  CLI::App app{"Longitudinal marginal-model estimation with asymptotic quasi-score equations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", aqsgee_version());

  std::string config;
  std::string out = ".";
  unsigned workers = 0;
  bool json = false;
  for (const char* name : {"fit", "diagnose", "simulate", "compare"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (created if missing)");
    sub->add_option("--workers", workers, "worker threads; 0 uses every core")->check(CLI::NonNegativeNumber);
    sub->add_flag("--json", json, "print a JSON summary on stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // Usage errors share the config exit code so scripts see one failure class.
    return code == 0 ? 0 : AQSGEE_ERR_CONFIG;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  char* summary = nullptr;
  const aqsgee_status status = aqsgee_run_command(command.c_str(), config.c_str(), out.c_str(), workers,
                                                  json ? &summary : nullptr);
  if (status != AQSGEE_OK) std::fprintf(stderr, "aqsgee %s: %s\n", command.c_str(), aqsgee_last_error());
  if (summary != nullptr) {
    std::fputs(summary, stdout);
    std::fputc('\n', stdout);
    aqsgee_string_free(summary);
  }
  return static_cast<int>(status);
}
