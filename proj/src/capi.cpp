//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "pmol/capi.h"

#include <cstring>
#include <string>

#include "pmol/commands.hpp"
#include "pmol/fingerprint.hpp"
#include "pmol/metrics.hpp"
#include "pmol/molecule_json.hpp"
#include "pmol/toy_corpus.hpp"

struct pmol_molecule {
  pmol::Molecule mol;
};

namespace {

thread_local std::string t_last_error;

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return PMOL_OK;
  } catch (const pmol::ConfigError& e) {
    t_last_error = e.what();
    return PMOL_ERR_CONFIG;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return PMOL_ERR_RUNTIME;
  }
}

int require(const void* p, const char* what) {
  if (p) return PMOL_OK;
  t_last_error = std::string("null ") + what;
  return PMOL_ERR_CONFIG;
}

}  // namespace

extern "C" {

const char* pmol_last_error(void) { return t_last_error.c_str(); }

const char* pmol_version(void) { return "promptmol 0.1.0"; }

int pmol_run_command(const char* command, const char* config_json,
                     char* out_path, int out_path_cap) {
  if (int rc = require(command, "command")) return rc;
  if (int rc = require(config_json, "config")) return rc;
  return guarded([&] {
    const std::string path = pmol::run_command(command, config_json);
    if (out_path && out_path_cap > 0) {
      const std::size_t n =
          std::min(path.size(), static_cast<std::size_t>(out_path_cap - 1));
      std::memcpy(out_path, path.data(), n);
      out_path[n] = '\0';
    }
  });
}

int pmol_molecule_read(const char* path, pmol_molecule** out) {
  if (int rc = require(path, "path")) return rc;
  if (int rc = require(out, "output handle")) return rc;
  return guarded(
      [&] { *out = new pmol_molecule{pmol::read_molecule_file(path)}; });
}

int pmol_molecule_parse(const char* json_text, pmol_molecule** out) {
  if (int rc = require(json_text, "document")) return rc;
  if (int rc = require(out, "output handle")) return rc;
  return guarded(
      [&] { *out = new pmol_molecule{pmol::parse_molecule_json(json_text)}; });
}

int pmol_molecule_write(const pmol_molecule* mol, const char* path) {
  if (int rc = require(mol, "molecule")) return rc;
  if (int rc = require(path, "path")) return rc;
  return guarded([&] { pmol::write_molecule_file(mol->mol, path); });
}

void pmol_molecule_free(pmol_molecule* mol) { delete mol; }

int pmol_molecule_atom_count(const pmol_molecule* mol) {
  return mol ? mol->mol.atom_count() : 0;
}

int pmol_molecule_is_valid(const pmol_molecule* mol) {
  return mol && pmol::validate(mol->mol).is_valid ? 1 : 0;
}

int pmol_molecule_is_stable(const pmol_molecule* mol) {
  return mol && pmol::validate(mol->mol).mol_stable ? 1 : 0;
}

int pmol_molecule_hbd(const pmol_molecule* mol) {
  return mol ? pmol::count_hbd(mol->mol) : 0;
}

int pmol_molecule_hba(const pmol_molecule* mol) {
  return mol ? pmol::count_hba(mol->mol) : 0;
}

double pmol_molecule_logp_proxy(const pmol_molecule* mol) {
  return mol ? pmol::logp_proxy(mol->mol) : 0.0;
}

double pmol_molecule_tpsa_proxy(const pmol_molecule* mol) {
  return mol ? pmol::tpsa_proxy(mol->mol) : 0.0;
}

double pmol_tanimoto(const pmol_molecule* a, const pmol_molecule* b) {
  if (!a || !b) return 0.0;
  return pmol::tanimoto(pmol::ecfp(a->mol), pmol::ecfp(b->mol));
}

int pmol_make_toy_corpus(const char* dir, int count, uint64_t seed) {
  if (int rc = require(dir, "directory")) return rc;
  return guarded([&] {
    pmol::ToyCorpusConfig config;
    config.count = count;
    config.seed = seed;
    pmol::write_toy_corpus(dir, config);
  });
}

}  // extern "C"
