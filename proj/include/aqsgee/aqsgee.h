#ifndef AQSGEE_AQSGEE_H
#define AQSGEE_AQSGEE_H

/* C interface to the aqsgee estimator library.
 *
 * Every function returns an aqsgee_status. On failure a message is kept in
 * thread-local storage and can be read with aqsgee_last_error() until the
 * next call on the same thread. Strings returned through char** out
 * parameters are owned by the caller and released with aqsgee_string_free. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define AQSGEE_API __declspec(dllexport)
#else
#define AQSGEE_API __attribute__((visibility("default")))
#endif

typedef enum aqsgee_status {
  AQSGEE_OK = 0,
  AQSGEE_ERR_INTERNAL = 1,
  AQSGEE_ERR_LOAD = 2,
  AQSGEE_ERR_NOT_CONVERGED = 3,
  AQSGEE_ERR_SINGULAR = 4,
  AQSGEE_ERR_INVALID_ARGUMENT = 5,
  AQSGEE_ERR_CONFIG = 6,
  AQSGEE_ERR_OVERFLOW = 7,
  AQSGEE_ERR_UNSUPPORTED = 8,
  AQSGEE_ERR_IO = 9
} aqsgee_status;

typedef struct aqsgee_dataset aqsgee_dataset;
typedef struct aqsgee_fit aqsgee_fit;

AQSGEE_API const char* aqsgee_version(void);
AQSGEE_API const char* aqsgee_last_error(void);
AQSGEE_API void aqsgee_string_free(char* s);

/* Datasets: CSV with header subject,time,y,x1..xp. */
AQSGEE_API aqsgee_status aqsgee_dataset_load(const char* path, aqsgee_dataset** out);
AQSGEE_API void aqsgee_dataset_free(aqsgee_dataset* data);
AQSGEE_API aqsgee_status aqsgee_dataset_dims(const aqsgee_dataset* data, size_t* n, size_t* m, size_t* p);

/* Fits the model described by a JSON object with the keys of a fit config
 * minus "data": {"link": ..., "model": {...}, "solver": {...}, "beta_init": [...]}.
 * NULL or "" means the defaults (linear link, aqs). A fit that does not
 * converge still yields a handle and returns AQSGEE_ERR_NOT_CONVERGED. */
AQSGEE_API aqsgee_status aqsgee_fit_create(const aqsgee_dataset* data, const char* options_json, aqsgee_fit** out);
AQSGEE_API void aqsgee_fit_free(aqsgee_fit* fit);
AQSGEE_API int aqsgee_fit_converged(const aqsgee_fit* fit);
AQSGEE_API size_t aqsgee_fit_dim(const aqsgee_fit* fit);
/* Copies min(len, p) coefficients (or sandwich standard errors) into out. */
AQSGEE_API aqsgee_status aqsgee_fit_beta(const aqsgee_fit* fit, double* out, size_t len);
AQSGEE_API aqsgee_status aqsgee_fit_se(const aqsgee_fit* fit, double* out, size_t len);
AQSGEE_API aqsgee_status aqsgee_fit_to_json(const aqsgee_fit* fit, char** out);

/* Mean function of a link ("linear", "log", "logistic", "probit") or one of
 * its first three derivatives (order 0..3) at u. */
AQSGEE_API aqsgee_status aqsgee_link_eval(const char* link, int order, double u, double* out);

/* Runs a batch command ("fit", "diagnose", "simulate", "compare") and writes
 * its files under out_dir. workers = 0 uses every core. The status doubles as
 * the process exit code. json_summary may be NULL. */
AQSGEE_API aqsgee_status aqsgee_run_command(const char* command, const char* config_path, const char* out_dir,
                                            unsigned workers, char** json_summary);

#ifdef __cplusplus
}
#endif

#endif
