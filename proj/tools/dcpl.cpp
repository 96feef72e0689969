// dcpl <mode> --config <path> [--out <dir>] [--seed <u64>]

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dcpl/cli.hpp"
#include "dcpl/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Source-free adaptation with learned pseudo-label noise transitions"};
  std::string mode;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("mode", mode,
                 "gen-synth | train-source | adapt | adapt-identity | adapt-oracle | verify | eval")
      ->required();
  app.add_option("--config,-c", config_path, "JSON run configuration");
  app.add_option("--out,-o", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "random seed (overrides seed and synth.seed)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(dcpl::ErrorCategory::kConfig);
  }

  try {
    dcpl::RunConfig cfg = config_path.empty() ? dcpl::parse_config_text("{}", "<defaults>")
                                              : dcpl::parse_config(config_path);
    const dcpl::RunMode cli_mode = dcpl::parse_mode(mode);
    if (cfg.mode && *cfg.mode != cli_mode)
      throw dcpl::ConfigError("config sets mode '" + dcpl::to_string(*cfg.mode) +
                              "' but the command line asks for '" + mode + "'");
    cfg.mode = cli_mode;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) {
      cfg.hp.seed = *seed;
      cfg.synth.seed = *seed;
    }
    return dcpl::execute(cfg, std::cerr);
  } catch (const dcpl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  }
}
