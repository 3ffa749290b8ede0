#pragma once

#include <sys/wait.h>

#include <filesystem>
#include <random>
#include <string>

#include "mmv/io.hpp"
#include "support.hpp"

namespace mmvtest {

struct CliResult {
  int code = -1;
  std::string output;  ///< stdout followed by stderr
};

/// Runs the mmvpipe binary with `args` (already shell-quoted) from `cwd`.
inline CliResult run_cli(const fs::path& cwd, const std::string& args) {
  const fs::path out = cwd / ".cli_stdout", err = cwd / ".cli_stderr";
  const std::string cmd = "cd '" + cwd.string() + "' && '" MMVPIPE_BIN "' " + args + " > '" + out.string() +
                          "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = read_bytes(out) + read_bytes(err);
  return r;
}

/// Paired-folder dataset under <root>/data with identical source and target
/// images, plus a config that standardizes sources and runs the identity
/// executor. Returns the config path.
inline fs::path write_cli_fixture(const fs::path& root, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  fs::create_directories(root / "data" / "source");
  fs::create_directories(root / "data" / "target");
  for (std::size_t i = 0; i < samples; ++i) {
    const std::string name = "sample" + std::to_string(i) + ".ndt";
    const mmv::Image img = random_image({mmv::Axis::Y, mmv::Axis::X}, {20 + i, 24}, rng, 0.0f, 1000.0f);
    mmv::write_ndt(img, root / "data" / "source" / name);
    mmv::write_ndt(img, root / "data" / "target" / name);
  }
  write_bytes(root / "pipe.yaml",
              "data:\n"
              "  mode: paired-folders\n"
              "  roots: [data]\n"
              "  cache_dir: cache\n"
              "preprocess:\n"
              "  - op: standard_norm\n"
              "executor:\n"
              "  kind: identity\n"
              "inference:\n"
              "  window: [16, 16]\n"
              "  overlap: 0.25\n"
              "eval:\n"
              "  metrics: [pearson]\n"
              "output:\n"
              "  dir: out\n");
  return root / "pipe.yaml";
}

}  // namespace mmvtest
