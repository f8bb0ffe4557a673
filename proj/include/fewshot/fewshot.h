/* C interface to the few-shot kernel library.
 *
 * Every function returns an fsl_status. On failure, fsl_last_error() gives a
 * message for the calling thread. Point sets are passed row-major as n x dim
 * arrays of doubles. Handles are opaque and released with their _free
 * function; freeing NULL is a no-op. */
#ifndef FEWSHOT_FEWSHOT_H
#define FEWSHOT_FEWSHOT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(FSL_BUILDING_LIBRARY)
#define FSL_API __attribute__((visibility("default")))
#else
#define FSL_API
#endif

typedef enum fsl_status {
  FSL_OK = 0,
  FSL_INVALID_ARGUMENT = 1,
  FSL_CONFIG = 2,
  FSL_INPUT_DATA = 3,
  FSL_NUMERIC = 4,
  FSL_IO = 5,
  FSL_INTERNAL = 6
} fsl_status;

typedef enum fsl_domain_kind { FSL_DOMAIN_UNIT_BALL = 0, FSL_DOMAIN_CUBE = 1 } fsl_domain_kind;

typedef struct fsl_kernel fsl_kernel;
typedef struct fsl_combination fsl_combination;
typedef struct fsl_model fsl_model;
typedef struct fsl_table fsl_table;

typedef struct fsl_ratio_estimate {
  size_t hits;
  size_t trials;
  double ratio;
  double ci_low;
  double ci_high;
} fsl_ratio_estimate;

typedef struct fsl_orthogonality {
  double mean_abs_cos;
  double std_cos;
  double mean_norm;
  double std_norm;
  size_t pairs;
  size_t excluded_pairs;
} fsl_orthogonality;

FSL_API const char* fsl_version(void);
FSL_API const char* fsl_status_name(fsl_status status);
/* Message for the last failing call on this thread; "" if none. */
FSL_API const char* fsl_last_error(void);
/* 0 selects the hardware concurrency. Results do not depend on this. */
FSL_API fsl_status fsl_set_workers(unsigned workers);

/* Kernels */
FSL_API fsl_status fsl_kernel_linear(double bias, fsl_kernel** out);
FSL_API fsl_status fsl_kernel_polynomial(int degree, double bias, fsl_kernel** out);
FSL_API fsl_status fsl_kernel_gaussian(double sigma, fsl_kernel** out);
/* {"type": "linear"|"polynomial"|"gaussian", "degree", "bias", "sigma"} */
FSL_API fsl_status fsl_kernel_from_json(const char* json, fsl_kernel** out);
FSL_API void fsl_kernel_free(fsl_kernel* kernel);
FSL_API fsl_status fsl_kernel_eval(const fsl_kernel* kernel, const double* x, const double* y, size_t dim,
                                   double* out);

/* Feature-space combinations sum_i w_i phi(x_i). weights == NULL gives the
 * plain mean of the support points. */
FSL_API fsl_status fsl_combination_create(const fsl_kernel* kernel, const double* support, size_t n, size_t dim,
                                          const double* weights, fsl_combination** out);
FSL_API void fsl_combination_free(fsl_combination* combination);
FSL_API fsl_status fsl_combination_self_inner(const fsl_combination* c, double* out);
/* |phi(y_r) - c|^2 for every row. */
FSL_API fsl_status fsl_centered_sq_norms(const fsl_combination* c, const double* points, size_t n, size_t dim,
                                         double* out);
/* (phi(y) - c, phi(z) - c). */
FSL_API fsl_status fsl_centered_inner(const fsl_combination* c, const double* y, const double* z, size_t dim,
                                      double* out);
/* (phi(y_r) - c, v - c) for every row. */
FSL_API fsl_status fsl_centered_inners(const fsl_combination* c, const fsl_combination* v, const double* points,
                                       size_t n, size_t dim, double* out);

/* Sampling; out receives n * dim values. half_width is ignored for the ball. */
FSL_API fsl_status fsl_sample_domain(fsl_domain_kind kind, size_t dim, double half_width, size_t n, uint64_t seed,
                                     double* out);

/* Geometry. z is the normal quantile of the Wilson interval, e.g. 1.96. */
FSL_API fsl_status fsl_enclosing_radius(const fsl_combination* c, const double* support, size_t n, size_t dim,
                                        double* out);
FSL_API fsl_status fsl_ball_ratio(const fsl_combination* c, const double* probes, size_t n, size_t dim, double r,
                                  double eps, double z, fsl_ratio_estimate* out);
FSL_API fsl_status fsl_cap_ratio(const fsl_combination* c, const fsl_combination* v, const double* probes, size_t n,
                                 size_t dim, double r, double delta, double z, fsl_ratio_estimate* out);
FSL_API fsl_status fsl_orthogonality_stats(const fsl_kernel* kernel, const double* points, size_t n, size_t dim,
                                           fsl_orthogonality* out);

/* Few-shot classifier: mean of the k shots against the old-class centre. */
FSL_API fsl_status fsl_model_fit(const fsl_kernel* kernel, const double* shots, size_t k, size_t dim,
                                 const fsl_combination* old_centre, fsl_model** out);
FSL_API void fsl_model_free(fsl_model* model);
FSL_API fsl_status fsl_model_dist2(const fsl_model* model, double* out);
FSL_API fsl_status fsl_model_decision_values(const fsl_model* model, const double* points, size_t n, size_t dim,
                                             double* out);
/* *is_new = 1 when the decision value is >= theta. */
FSL_API fsl_status fsl_model_classify(const fsl_model* model, const double* x, size_t dim, double theta,
                                      int* is_new);
FSL_API fsl_status fsl_auroc(const double* pos, size_t n_pos, const double* neg, size_t n_neg, double* out);

/* Feature tables (CSV with a trailing "label" column). */
FSL_API fsl_status fsl_table_read(const char* path, fsl_table** out);
FSL_API fsl_status fsl_table_parse(const char* text, size_t length, const char* source, fsl_table** out);
FSL_API void fsl_table_free(fsl_table* table);
FSL_API fsl_status fsl_table_shape(const fsl_table* table, size_t* rows, size_t* width);
/* Copies `width` values of row i into out. */
FSL_API fsl_status fsl_table_row(const fsl_table* table, size_t i, double* out);
/* Returned strings live as long as the table. */
FSL_API fsl_status fsl_table_label(const fsl_table* table, size_t i, const char** out);
FSL_API fsl_status fsl_table_checksum(const fsl_table* table, const char** out);

/* Runs an experiment subcommand on a JSON config. When out_dir is non-NULL
 * the report and data files are written there. When report_json is non-NULL
 * it receives the report, to be released with fsl_string_free. */
FSL_API fsl_status fsl_run_experiment(const char* command, const char* config_json, const char* out_dir,
                                      char** report_json);
FSL_API void fsl_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
