#ifndef YAMABE_C_H
#define YAMABE_C_H

/* C interface of the yamabe shared library.  Handles are opaque; every
 * function returns a status code and never lets an exception escape.  The
 * message of the last failure on the calling thread is available from
 * yamabe_last_error(). */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define YAMABE_API __attribute__((visibility("default")))
#else
#define YAMABE_API
#endif

typedef enum {
  YAMABE_OK = 0,
  YAMABE_ERR_CONFIG = 1,   /* invalid configuration */
  YAMABE_ERR_SOLVER = 2,   /* solver or I/O failure */
  YAMABE_ERR_CHECK = 3,    /* internal acceptance check failed */
  YAMABE_ERR_ARGUMENT = 4, /* null handle, bad index, bad parameter */
  YAMABE_ERR_INTERNAL = 5
} yamabe_status;

typedef struct yamabe_config yamabe_config;
typedef struct yamabe_result yamabe_result;

typedef struct {
  double product_R;     /* (n-1)(n-2-2d) */
  double model_H;       /* -d h / sqrt(1+h^2) */
  double euclidean_H;   /* at distance t from the singular set */
  double conformal_R;   /* rho^{-2} conformal change of the flat cone */
  double conformal_H;
  double c0_star;       /* coefficients of the exact profile rho^{-(n-2)/2} */
  double c1_star;
} yamabe_curvatures;

YAMABE_API const char* yamabe_version(void);
YAMABE_API const char* yamabe_last_error(void);

/* Configuration: parsed and validated on load. */
YAMABE_API yamabe_status yamabe_config_load(const char* path, yamabe_config** out);
YAMABE_API yamabe_status yamabe_config_parse(const char* text, yamabe_config** out);
YAMABE_API yamabe_status yamabe_config_kind(const yamabe_config* cfg, const char** kind);
/* Selects the experiment kind; YAMABE_ERR_CONFIG if the file declared a
 * different one. */
YAMABE_API yamabe_status yamabe_config_select_kind(yamabe_config* cfg, const char* kind);
YAMABE_API void yamabe_config_free(yamabe_config* cfg);

/* Runs the experiment.  out_dir may be null (config output or "out");
 * write_files = 0 keeps everything in memory.  A result handle is returned
 * whenever the run started, also for solver and check failures; its exit code
 * mirrors the status. */
YAMABE_API yamabe_status yamabe_run(const yamabe_config* cfg, const char* out_dir, int threads, int strict,
                                    int write_files, yamabe_result** out);
YAMABE_API int yamabe_result_exit_code(const yamabe_result* res);
YAMABE_API const char* yamabe_result_message(const yamabe_result* res);
YAMABE_API const char* yamabe_result_summary_json(const yamabe_result* res);
YAMABE_API size_t yamabe_result_verdict_count(const yamabe_result* res);
YAMABE_API const char* yamabe_result_verdict(const yamabe_result* res, size_t index);
YAMABE_API size_t yamabe_result_file_count(const yamabe_result* res);
YAMABE_API const char* yamabe_result_file(const yamabe_result* res, size_t index);
YAMABE_API void yamabe_result_free(yamabe_result* res);

/* Closed-form curvature quantities of the model cone C_{d,h} in R^n. */
YAMABE_API yamabe_status yamabe_curvatures_eval(int n, int d, double h, double t, yamabe_curvatures* out);

#ifdef __cplusplus
}
#endif

#endif
