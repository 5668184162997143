/* C interface to the deltacert library.
 *
 * Every function returns a dc_status. On failure the message of the last
 * error on the calling thread is available from dc_last_error(). Strings
 * returned through char** out-parameters are heap-allocated and must be
 * released with dc_string_free(). Structured inputs and outputs are JSON
 * documents in the same shape as the files the CLI reads and writes.
 */
#ifndef DELTACERT_H
#define DELTACERT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DC_API __declspec(dllexport)
#else
#define DC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dc_status {
  DC_OK = 0,
  DC_ERR_INVALID_ARGUMENT = 1,
  DC_ERR_PARSE = 2,
  DC_ERR_IO = 3,
  DC_ERR_INFEASIBLE = 4,
  DC_ERR_NUMERICAL = 5,
  DC_ERR_REFUSED = 6,
  DC_ERR_ORACLE = 7,
  DC_ERR_INTERNAL = 8
} dc_status;

typedef struct dc_network dc_network;
typedef struct dc_dataset dc_dataset;

DC_API const char* dc_version(void);
DC_API const char* dc_status_name(dc_status status);
/* Message of the last failed call on this thread; empty after success. */
DC_API const char* dc_last_error(void);
DC_API void dc_string_free(char* s);

/* ---- networks ---------------------------------------------------------- */

/* m_override < 0 keeps the size given in the description. */
DC_API dc_status dc_network_load(const char* path, long m_override, dc_network** out);
DC_API dc_status dc_network_parse(const char* json_text, long m_override, dc_network** out);
DC_API void dc_network_free(dc_network* net);
DC_API dc_status dc_network_info(const dc_network* net, size_t* m, size_t* state_dim);
DC_API dc_status dc_network_subsystem(const dc_network* net, size_t index, int* id, size_t* n,
                                      size_t* p);
/* {"m": M, "sources": [[j, ...], ...]} */
DC_API dc_status dc_network_topology(const dc_network* net, char** topology_json);
/* out has state_dim entries. */
DC_API dc_status dc_network_step(const dc_network* net, const double* x, double* out);
/* out has k_max + 1 entries. */
DC_API dc_status dc_divergence_series(const dc_network* net, const double* x0,
                                      const double* x0_prime, size_t k_max, double* out);
DC_API dc_status dc_check_homogeneity(const dc_network* net, size_t index, size_t samples,
                                      const double* etas, size_t eta_count, double tol,
                                      uint64_t seed, double* max_deviation, int* pass);

/* ---- data -------------------------------------------------------------- */

/* sampling_json: {"scheme", "points_per_axis", "count", "bound", "seed"}; NULL for defaults. */
DC_API dc_status dc_collect(const dc_network* net, size_t index, const char* sampling_json,
                            size_t jobs, dc_dataset** out);
DC_API dc_status dc_dataset_normalize(const dc_dataset* raw, dc_dataset** out);
DC_API dc_status dc_dataset_load(const char* path, dc_dataset** out);
DC_API dc_status dc_dataset_save(const dc_dataset* ds, const char* path);
DC_API void dc_dataset_free(dc_dataset* ds);
DC_API dc_status dc_dataset_info(const dc_dataset* ds, size_t* records, size_t* n, size_t* p,
                                 int* normalized);
DC_API dc_status dc_dataset_hash(const dc_dataset* ds, char** hash);
/* test_points_per_axis = 0 picks the finest grid within budget. */
DC_API dc_status dc_estimate_dispersion(const dc_dataset* ds, size_t test_points_per_axis,
                                        size_t jobs, size_t budget, char** result_json);

/* ---- synthesis and certification -------------------------------------- */

/* sop_json: SopConfig fields; NULL for defaults. The template is the full
 * quadratic one unless template_json ({"n", "basis"}) is given. */
DC_API dc_status dc_solve_sop(const dc_dataset* ds, const char* sop_json,
                              const char* template_json, size_t jobs, char** solution_json);
DC_API dc_status dc_audit_solution(const dc_dataset* ds, const char* solution_json, double tol,
                                   char** audit_json);
DC_API dc_status dc_estimate_lipschitz(const dc_network* net, size_t index,
                                       const char* solution_json, const char* config_json,
                                       size_t jobs, char** estimate_json);
DC_API dc_status dc_check_subsystem(const char* solution_json, double epsilon, double l, int id,
                                    char** certificate_json);
/* gains_json: [{"gamma", "rho", "alpha_lo", "alpha_hi"}, ...]. Never refuses;
 * the report carries "pass". */
DC_API dc_status dc_evaluate_composition(const char* gains_json, const char* topology_json,
                                         char** composition_json);
/* certificates_json: array of subsystem certificates; assignment_json maps
 * each subsystem to an entry (NULL for one certificate per subsystem).
 * Returns DC_ERR_REFUSED when the small-gain condition fails. */
DC_API dc_status dc_compose(const char* certificates_json, const char* topology_json,
                            const char* assignment_json, char** network_certificate_json);
DC_API dc_status dc_evaluate_v(const char* network_certificate_json, const double* x,
                               const double* x_prime, size_t dim, double* value);
DC_API dc_status dc_validate_network(const dc_network* net, const char* network_certificate_json,
                                     size_t samples, uint64_t seed, double tol, size_t jobs,
                                     char** report_json);
DC_API dc_status dc_complexity_csv(const size_t* dims, size_t dim_count, size_t points_per_axis,
                                   const size_t* m_values, size_t m_count, char** csv);

/* Model-based reference for a description of linear subsystems.
 * options_json: {"theta", "gamma_bar", "p_override": [matrix|null, ...],
 * "rho_override": [number|null, ...]}; NULL for defaults. */
DC_API dc_status dc_baseline(const char* network_path, const char* options_json,
                             char** result_json);

/* ---- pipeline ---------------------------------------------------------- */

DC_API dc_status dc_default_config(char** config_json);
/* Runs the full certification. exit_code follows the CLI contract
 * (0 pass, 2 margin, 3 composition, 4 infeasible, 5 config/io, 1 other). */
DC_API dc_status dc_run_pipeline(const char* config_json, int* exit_code, char** summary,
                                 char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* DELTACERT_H */
