//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//
// Writes the synthetic training corpus used by the end-to-end tests and the
// quick-start walkthrough.

#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "pmol/capi.h"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic molecule corpus with property labels"};
  std::string out = "corpus";
  int count = 600;
  std::uint64_t seed = 7;
  app.add_option("-o,--out", out, "Output directory");
  app.add_option("-n,--count", count, "Number of molecules")
      ->check(CLI::PositiveNumber);
  app.add_option("-s,--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  const int rc = pmol_make_toy_corpus(out.c_str(), count, seed);
  if (rc != PMOL_OK) {
    std::fprintf(stderr, "error: %s\n", pmol_last_error());
    return rc;
  }
  std::printf("%s\n", out.c_str());
  return 0;
}
