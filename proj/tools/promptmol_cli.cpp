//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end.  Talks to the core library exclusively through
// the C API, the way an external binding would.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include <json.hpp>
#include "pmol/capi.h"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out;
  std::string seed;  // kept textual so "unset" is representable
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool wants_workers) {
  cmd->add_option("-c,--config", args.config_path,
                  "JSON config file (use - for stdin)")
      ->required();
  cmd->add_option("-o,--out", args.out, "Override the config's output path");
  cmd->add_option("-s,--seed", args.seed, "Override the config's seed");
  if (wants_workers)
    cmd->add_option("-j,--workers", args.workers,
                    "Parallel runs (optimize only)");
}

int run(const std::string& command, const CommonArgs& args) {
  std::string text;
  if (args.config_path == "-") {
    std::ostringstream buffer;
    buffer << std::cin.rdbuf();
    text = buffer.str();
  } else {
    std::ifstream in(args.config_path);
    if (!in) {
      std::fprintf(stderr, "error: cannot open config %s\n",
                   args.config_path.c_str());
      return PMOL_ERR_CONFIG;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    text = buffer.str();
  }

  nlohmann::json config = nlohmann::json::parse(text, nullptr, false);
  if (config.is_discarded()) {
    std::fprintf(stderr, "error: config is not valid JSON\n");
    return PMOL_ERR_CONFIG;
  }
  if (!args.out.empty()) config["out"] = args.out;
  if (!args.seed.empty()) {
    try {
      config["seed"] = std::stoull(args.seed);
    } catch (const std::exception&) {
      std::fprintf(stderr, "error: seed must be an unsigned integer\n");
      return PMOL_ERR_CONFIG;
    }
  }
  if (args.workers > 0) config["workers"] = args.workers;

  char out_path[4096] = {0};
  const int rc = pmol_run_command(command.c_str(), config.dump().c_str(),
                                  out_path, sizeof(out_path));
  if (rc != PMOL_OK) {
    std::fprintf(stderr, "error: %s\n", pmol_last_error());
    return rc;
  }
  std::printf("%s\n", out_path);
  return PMOL_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promptmol: text-prompt-guided molecule generation and "
               "optimization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pmol_version()));

  struct Sub {
    const char* name;
    const char* help;
    bool workers;
  };
  const Sub subs[] = {
      {"train-diffusion", "Train the joint 2D+3D denoiser", false},
      {"train-align", "Train the text-molecule alignment encoders", false},
      {"sample", "Draw molecules from a trained denoiser", false},
      {"optimize", "Prompt-guided optimization of an input molecule", true},
      {"evaluate", "Score optimization outputs against property specs",
       false},
  };

  CommonArgs args[5];
  std::string chosen;
  for (int k = 0; k < 5; ++k) {
    CLI::App* cmd = app.add_subcommand(subs[k].name, subs[k].help);
    add_common(cmd, args[k], subs[k].workers);
    const std::string name = subs[k].name;
    cmd->callback([&chosen, name] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);

  for (int k = 0; k < 5; ++k)
    if (chosen == subs[k].name) return run(chosen, args[k]);
  return PMOL_ERR_CONFIG;
}
