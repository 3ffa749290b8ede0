// mmvpipe: pair / cache / run / eval / inspect over a pipeline config.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmv/commands.hpp"

namespace {

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;
};

CLI::App* add_config_command(CLI::App& app, const char* name, const char* help, ConfigArgs& args) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--config,-c", args.config, "pipeline config (YAML or JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("overrides", args.overrides, "dotted key=value overrides, applied in order");
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microscopy image-to-image pipeline"};
  app.require_subcommand(1);

  ConfigArgs args;
  CLI::App* pair = add_config_command(app, "pair", "discover source/target pairs and write the manifest", args);
  CLI::App* cache = add_config_command(app, "cache", "preprocess the manifest into the content-addressed cache", args);
  CLI::App* run = add_config_command(app, "run", "tiled inference over the inputs", args);
  CLI::App* eval = add_config_command(app, "eval", "score predictions against the manifest targets", args);

  std::vector<std::string> files;
  CLI::App* inspect = app.add_subcommand("inspect", "print NDT/TIFF header information");
  inspect->add_option("files", files, "image files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? mmv::kExitOk : mmv::kExitStartup;
  }

  try {
    if (inspect->parsed()) return mmv::cmd_inspect({files.begin(), files.end()}, std::cout, std::cerr);
    const mmv::PipelineConfig config = mmv::load_config(args.config, args.overrides);
    if (pair->parsed()) return mmv::cmd_pair(config, std::cout, std::cerr);
    if (cache->parsed()) return mmv::cmd_cache(config, std::cout, std::cerr);
    if (run->parsed()) return mmv::cmd_run(config, std::cout, std::cerr);
    if (eval->parsed()) return mmv::cmd_eval(config, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mmv::kExitStartup;
  }
  return mmv::kExitStartup;
}
