//
// Project promptmol - Copyright 2026 the promptmol authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "pmol/capi.h"
#include "pmol/metrics.hpp"
#include "pmol/molecule_json.hpp"
#include "reference_molecules.hpp"

namespace fs = std::filesystem;
namespace ref = pmol::testref;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("version string names the library") {
  const std::string v = pmol_version();
  CHECK(v == "promptmol 0.1.0");
}

TEST_CASE("molecule round trip matches the native implementation") {
  TempDir tmp("pmol_test_capi_roundtrip");
  const std::string path = (tmp.path / "ethanol.json").string();
  pmol::write_molecule_file(ref::ethanol(), path);

  pmol_molecule* mol = nullptr;
  REQUIRE(pmol_molecule_read(path.c_str(), &mol) == PMOL_OK);
  REQUIRE(mol != nullptr);
  CHECK(std::string(pmol_last_error()).empty());

  const pmol::Molecule native = ref::ethanol();
  CHECK(pmol_molecule_atom_count(mol) == native.atom_count());
  CHECK(pmol_molecule_is_valid(mol) == 1);
  CHECK(pmol_molecule_is_stable(mol) == 1);
  CHECK(pmol_molecule_hbd(mol) == pmol::count_hbd(native));
  CHECK(pmol_molecule_hba(mol) == pmol::count_hba(native));
  CHECK(pmol_molecule_logp_proxy(mol) ==
        doctest::Approx(pmol::logp_proxy(native)));
  CHECK(pmol_molecule_tpsa_proxy(mol) ==
        doctest::Approx(pmol::tpsa_proxy(native)));

  // write through the C API, read back natively, byte-stable serialization
  const std::string copy = (tmp.path / "copy.json").string();
  REQUIRE(pmol_molecule_write(mol, copy.c_str()) == PMOL_OK);
  const pmol::Molecule reread = pmol::read_molecule_file(
      copy, pmol::AtomVocabulary::default_vocabulary());
  CHECK(pmol::serialize_molecule(reread) ==
        pmol::serialize_molecule(native));

  pmol_molecule* parsed = nullptr;
  REQUIRE(pmol_molecule_parse(pmol::serialize_molecule(native).c_str(),
                              &parsed) == PMOL_OK);
  CHECK(pmol_molecule_atom_count(parsed) == native.atom_count());
  CHECK(pmol_tanimoto(mol, parsed) == 1.0);
  pmol_molecule_free(parsed);
  pmol_molecule_free(mol);
}

TEST_CASE("tanimoto separates different molecules") {
  TempDir tmp("pmol_test_capi_tanimoto");
  const std::string a_path = (tmp.path / "a.json").string();
  const std::string b_path = (tmp.path / "b.json").string();
  pmol::write_molecule_file(ref::benzene(), a_path);
  pmol::write_molecule_file(ref::thiophene(), b_path);
  pmol_molecule* a = nullptr;
  pmol_molecule* b = nullptr;
  REQUIRE(pmol_molecule_read(a_path.c_str(), &a) == PMOL_OK);
  REQUIRE(pmol_molecule_read(b_path.c_str(), &b) == PMOL_OK);
  CHECK(pmol_tanimoto(a, a) == 1.0);
  CHECK(pmol_tanimoto(a, b) > 0.0);
  CHECK(pmol_tanimoto(a, b) < 1.0);
  pmol_molecule_free(a);
  pmol_molecule_free(b);
}

TEST_CASE("toy corpus export is usable from the native loader") {
  TempDir tmp("pmol_test_capi_corpus");
  const std::string dir = (tmp.path / "corpus").string();
  REQUIRE(pmol_make_toy_corpus(dir.c_str(), 12, 77) == PMOL_OK);
  CHECK(fs::exists(dir + "/properties.csv"));
  const pmol::Corpus corpus =
      pmol::load_corpus(dir, pmol::AtomVocabulary::default_vocabulary());
  CHECK(corpus.items.size() == 12);
}

TEST_CASE("error paths set codes and messages") {
  pmol_molecule* mol = nullptr;
  CHECK(pmol_molecule_read("/no/such/file.json", &mol) != PMOL_OK);
  CHECK(mol == nullptr);
  CHECK(!std::string(pmol_last_error()).empty());

  CHECK(pmol_molecule_parse("{ not json", &mol) != PMOL_OK);
  CHECK(mol == nullptr);
  CHECK(!std::string(pmol_last_error()).empty());

  // null arguments are rejected, not dereferenced
  CHECK(pmol_molecule_read(nullptr, &mol) != PMOL_OK);
  CHECK(pmol_molecule_parse("{}", nullptr) != PMOL_OK);
  CHECK(pmol_molecule_write(nullptr, "x.json") != PMOL_OK);
  CHECK(pmol_make_toy_corpus(nullptr, 5, 1) != PMOL_OK);
  CHECK(pmol_run_command(nullptr, "{}", nullptr, 0) != PMOL_OK);

  // degenerate queries on a null handle come back as harmless defaults
  CHECK(pmol_molecule_atom_count(nullptr) == 0);
  CHECK(pmol_molecule_is_valid(nullptr) == 0);
}

TEST_CASE("run_command reports config failures with the config code") {
  char out_path[256];
  CHECK(pmol_run_command("no-such-command", "{}", out_path,
                         sizeof(out_path)) == PMOL_ERR_CONFIG);
  CHECK(!std::string(pmol_last_error()).empty());
  CHECK(pmol_run_command("sample", "{ broken", out_path,
                         sizeof(out_path)) == PMOL_ERR_CONFIG);
  CHECK(pmol_run_command("sample", "{\"bogus\": 1}", out_path,
                         sizeof(out_path)) == PMOL_ERR_CONFIG);
}

TEST_CASE("run_command copies the primary output path") {
  TempDir tmp("pmol_test_capi_run");
  const std::string dir = (tmp.path / "corpus").string();
  REQUIRE(pmol_make_toy_corpus(dir.c_str(), 8, 5) == PMOL_OK);

  // train a deliberately tiny model through the command entry point
  const std::string out = (tmp.path / "run").string();
  const std::string train_config =
      std::string("{\"corpus\": \"") + dir + "\", \"out\": \"" + out +
      "\", \"model\": {\"layers\": 1, \"d_node\": 12, \"d_edge\": 6, "
      "\"d_pos\": 6, \"T\": 8}, \"train\": {\"epochs\": 1, "
      "\"batch_size\": 4}}";
  char out_path[512];
  REQUIRE(pmol_run_command("train-diffusion", train_config.c_str(), out_path,
                           sizeof(out_path)) == PMOL_OK);
  CHECK(std::string(out_path) == out + "/checkpoint");
  CHECK(std::string(pmol_last_error()).empty());

  // a NULL out_path only skips the copy
  REQUIRE(pmol_run_command(
              "sample",
              (std::string("{\"checkpoint\": \"") + out_path +
               "\", \"out\": \"" + out + "/s\", \"n_samples\": 1, "
               "\"n_atoms\": 3}")
                  .c_str(),
              nullptr, 0) == PMOL_OK);
  CHECK(fs::exists(out + "/s/samples/sample_00000.json"));
}

}  // TEST_SUITE
