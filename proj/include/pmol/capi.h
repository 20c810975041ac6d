/*
 * Project promptmol - Copyright 2026 the promptmol authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef PMOL_CAPI_H
#define PMOL_CAPI_H

#include <stdint.h>

#if defined(_WIN32)
#define PMOL_API __declspec(dllexport)
#else
#define PMOL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes shared with the CLI exit codes. */
#define PMOL_OK 0
#define PMOL_ERR_CONFIG 2  /* malformed config or input document */
#define PMOL_ERR_RUNTIME 3 /* I/O failure, numerical failure, missing file */

/* Message for the last failing call on this thread; empty after success.
 * The pointer stays valid until the next call from the same thread. */
PMOL_API const char* pmol_last_error(void);

PMOL_API const char* pmol_version(void);

/* Runs one command by name: "train-diffusion", "train-align", "sample",
 * "optimize", or "evaluate".  config_json is the command's strict JSON
 * config.  On success the primary output path is copied into out_path
 * (NUL-terminated, silently truncated to out_path_cap bytes); pass NULL to
 * skip it. */
PMOL_API int pmol_run_command(const char* command, const char* config_json,
                              char* out_path, int out_path_cap);

/* Opaque molecule handle. */
typedef struct pmol_molecule pmol_molecule;

PMOL_API int pmol_molecule_read(const char* path, pmol_molecule** out);
PMOL_API int pmol_molecule_parse(const char* json_text, pmol_molecule** out);
PMOL_API int pmol_molecule_write(const pmol_molecule* mol, const char* path);
PMOL_API void pmol_molecule_free(pmol_molecule* mol);

PMOL_API int pmol_molecule_atom_count(const pmol_molecule* mol);
/* Boolean queries return 1/0. */
PMOL_API int pmol_molecule_is_valid(const pmol_molecule* mol);
PMOL_API int pmol_molecule_is_stable(const pmol_molecule* mol);

/* Structural properties used by the evaluation harness. */
PMOL_API int pmol_molecule_hbd(const pmol_molecule* mol);
PMOL_API int pmol_molecule_hba(const pmol_molecule* mol);
PMOL_API double pmol_molecule_logp_proxy(const pmol_molecule* mol);
PMOL_API double pmol_molecule_tpsa_proxy(const pmol_molecule* mol);

/* Circular-fingerprint similarity in [0, 1]. */
PMOL_API double pmol_tanimoto(const pmol_molecule* a, const pmol_molecule* b);

/* Writes the bundled synthetic training corpus (molecule JSON files plus
 * properties.csv) under dir. */
PMOL_API int pmol_make_toy_corpus(const char* dir, int count, uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* PMOL_CAPI_H */
