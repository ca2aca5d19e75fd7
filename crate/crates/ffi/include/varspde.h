#ifndef VARSPDE_H
#define VARSPDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VspStatus {
  VSP_STATUS_OK = 0,
  VSP_STATUS_NULL_POINTER = 1,
  VSP_STATUS_INVALID_ARGUMENT = 2,
  VSP_STATUS_SHAPE = 3,
  VSP_STATUS_NUMERIC = 4,
  VSP_STATUS_CONFIG = 5,
  VSP_STATUS_IO = 6,
  VSP_STATUS_BUFFER_TOO_SMALL = 7,
  VSP_STATUS_PANIC = 8,
} VspStatus;

typedef enum VspDomain {
  VSP_DOMAIN_INTERVAL = 0,
  VSP_DOMAIN_SQUARE = 1,
} VspDomain;

typedef enum VspSpace {
  VSP_SPACE_H = 0,
  VSP_SPACE_V = 1,
  VSP_SPACE_V_DUAL = 2,
  /**
   * `[H, V]_s`.
   */
  VSP_SPACE_COMPLEX_INTERP = 3,
  /**
   * `(H, V)_{s,p}`.
   */
  VSP_SPACE_REAL_INTERP = 4,
} VspSpace;

typedef struct VspConfig VspConfig;

typedef struct VspEnsemble VspEnsemble;

typedef struct VspTriple VspTriple;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or the validation report of
 * [`vsp_config_validate`]; empty after a clean call.
 * Valid until the next call into the library from the same thread.
 */
const char *vsp_last_error(void);

/**
 * Library version, a static string.
 */
const char *vsp_version(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum VspStatus vsp_triple_new(enum VspDomain domain,
                              size_t dim,
                              size_t components,
                              struct VspTriple **out);

/**
 * # Safety
 * `eigenvalues` must point to `len` doubles and `out` must be valid for writes.
 */
enum VspStatus vsp_triple_from_eigenvalues(const double *eigenvalues,
                                           size_t len,
                                           size_t components,
                                           struct VspTriple **out);

/**
 * # Safety
 * `triple` must come from `vsp_triple_new` and not be used afterwards.
 */
void vsp_triple_free(struct VspTriple *triple);

/**
 * Number of Galerkin coefficients, 0 for a null handle.
 *
 * # Safety
 * `triple` must be null or a live handle.
 */
size_t vsp_triple_len(const struct VspTriple *triple);

/**
 * Copies the eigenvalues of one component (`dim` values) into `buf`.
 *
 * # Safety
 * `triple` must be a live handle and `buf` valid for `len` writes.
 */
enum VspStatus vsp_triple_eigenvalues(const struct VspTriple *triple, double *buf, size_t len);

/**
 * Norm of a coefficient vector. `s` and `p` are read only by the
 * interpolation spaces.
 *
 * # Safety
 * `triple` must be a live handle, `coeffs` must hold `len` doubles and
 * `out` must be valid for writes.
 */
enum VspStatus vsp_norm(const struct VspTriple *triple,
                        const double *coeffs,
                        size_t len,
                        enum VspSpace space,
                        double s,
                        double p,
                        double *out);

/**
 * `ψ_m`, `ψ_m′` and `ψ_m″` at `xi`; any output pointer may be null.
 *
 * # Safety
 * Non-null outputs must be valid for writes.
 */
enum VspStatus vsp_psi(double q, double m, double xi, double *psi, double *d1, double *d2);

/**
 * Euclidean projection of `y` onto the closed ball of `radius`, written to `out`
 * (which may alias `y`).
 *
 * # Safety
 * `y` and `out` must each hold `len` doubles.
 */
enum VspStatus vsp_project_ball(const double *y, size_t len, double radius, double *out);

/**
 * Parses a config; `json` selects JSON over TOML.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` valid for writes.
 */
enum VspStatus vsp_config_parse(const char *text, bool json, struct VspConfig **out);

/**
 * Reads a config file (`.json` as JSON, anything else as TOML).
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` valid for writes.
 */
enum VspStatus vsp_config_load(const char *path, struct VspConfig **out);

/**
 * # Safety
 * `config` must come from `vsp_config_parse` or `vsp_config_load`.
 */
void vsp_config_free(struct VspConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum VspStatus vsp_config_set_seed(struct VspConfig *config, uint64_t seed);

/**
 * Number of validation issues; their text goes to [`vsp_last_error`].
 *
 * # Safety
 * `config` must be a live handle and `issues` valid for writes.
 */
enum VspStatus vsp_config_validate(const struct VspConfig *config, size_t *issues);

/**
 * Runs the experiment and writes its outputs and manifest to `out_dir`.
 * `exit_code` receives the command-line exit code (0, 1, 2 or 3).
 * `workers == 0` means automatic.
 *
 * # Safety
 * `config` must be a live handle, `out_dir` a nul-terminated string and
 * `exit_code` null or valid for writes.
 */
enum VspStatus vsp_config_run(const struct VspConfig *config,
                              const char *out_dir,
                              size_t workers,
                              int32_t *exit_code);

/**
 * Trajectories of a `solve-linear` or `solve-ql` config.
 *
 * # Safety
 * `config` must be a live handle and `out` valid for writes.
 */
enum VspStatus vsp_config_solve(const struct VspConfig *config,
                                size_t workers,
                                struct VspEnsemble **out);

/**
 * # Safety
 * `ensemble` must come from `vsp_config_solve`.
 */
void vsp_ensemble_free(struct VspEnsemble *ensemble);

/**
 * Paths, time points and state length; any output may be null.
 *
 * # Safety
 * `ensemble` must be a live handle; non-null outputs must be valid for writes.
 */
enum VspStatus vsp_ensemble_shape(const struct VspEnsemble *ensemble,
                                  size_t *paths,
                                  size_t *times,
                                  size_t *state_len);

/**
 * # Safety
 * `ensemble` must be a live handle and `buf` valid for `len` writes.
 */
enum VspStatus vsp_ensemble_grid(const struct VspEnsemble *ensemble, double *buf, size_t len);

/**
 * One path, time-major (`times × state_len` values).
 *
 * # Safety
 * `ensemble` must be a live handle and `buf` valid for `len` writes.
 */
enum VspStatus vsp_ensemble_path(const struct VspEnsemble *ensemble,
                                 size_t path,
                                 double *buf,
                                 size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VARSPDE_H */
