/* C interface of the plasticgraph solver library.
 *
 * All functions return pg_status; PG_OK means success. On failure a
 * human-readable message is available from pg_last_error() until the next
 * call on the same thread. Strings returned through char** out-parameters
 * are heap-allocated and must be released with pg_string_free().
 */
#ifndef PLASTICGRAPH_CAPI_H
#define PLASTICGRAPH_CAPI_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pg_status {
  PG_OK = 0,
  PG_ERR_IO = 1,           /* unreadable or unwritable files */
  PG_ERR_INPUT = 2,        /* schema violations, dangling references, bad BCs */
  PG_ERR_INVALID_ARG = 3,  /* null handles, malformed argument strings */
  PG_ERR_NONCONVERGED = 4, /* a solve exhausted its budget */
  PG_ERR_INTERNAL = 5,
} pg_status;

const char* pg_version(void);
const char* pg_last_error(void);
void pg_string_free(char* text);

/* Opaque problem definition parsed from a JSON file. */
typedef struct pg_problem pg_problem;

pg_status pg_problem_load(const char* path, pg_problem** out);
void pg_problem_free(pg_problem* problem);

/* Resolved configuration echo (mesh size, materials, steps, free DOFs). */
pg_status pg_problem_summary(const pg_problem* problem, char** out);

typedef struct pg_solve_options {
  int threads;            /* element-loop workers, >= 1 */
  const char* output_dir; /* NULL keeps the problem's output directory */
  int keep_going;         /* continue past non-converged steps */
} pg_solve_options;

void pg_solve_options_init(pg_solve_options* options);

/* Runs the load history, writes VTK/CSV/fields files, reports per-step
 * results. Returns PG_ERR_NONCONVERGED if any step missed its tolerance. */
pg_status pg_solve(const pg_problem* problem, const pg_solve_options* options, char** report);

/* Condition-number and convergence study over structured mesh variants,
 * e.g. meshes = "20x5x5,40x10x10". Writes a CSV when csv_path is non-NULL. */
pg_status pg_conditioning(const pg_problem* problem, const char* meshes, int threads,
                          const char* csv_path, char** report);

/* MAE / relative-L2 comparison of two fields files. */
pg_status pg_metrics(const char* fields_path, const char* reference_path, char** report);

/* Central-difference validation of both loss gradients at random admissible
 * states. Returns PG_ERR_NONCONVERGED when a check exceeds its tolerance. */
pg_status pg_gradcheck(const pg_problem* problem, uint64_t seed, int points, int threads,
                       char** report);

#ifdef __cplusplus
}
#endif

#endif /* PLASTICGRAPH_CAPI_H */
