/*
 * nnsub: subspace factorisation (SVD, NMF, DNMF, SCNMFS), few-shot
 * evaluation over precomputed features and subspace class activation maps.
 *
 * Plain C interface over opaque handles. Every fallible call returns an
 * nnsub_status; on failure nnsub_last_error() holds a message for the
 * calling thread until its next failing call. Strings returned through
 * char** out-parameters are owned by the caller and released with
 * nnsub_string_free.
 */
#ifndef NNSUB_NNSUB_H
#define NNSUB_NNSUB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(NNSUB_BUILDING_LIBRARY)
#    define NNSUB_API __declspec(dllexport)
#  else
#    define NNSUB_API __declspec(dllimport)
#  endif
#else
#  define NNSUB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nnsub_status {
  NNSUB_OK = 0,
  NNSUB_E_DIMENSION = 1,
  NNSUB_E_NUMERIC = 2,
  NNSUB_E_NONNEGATIVITY = 3,
  NNSUB_E_LABEL_MISMATCH = 4,
  NNSUB_E_PARSE = 5,
  NNSUB_E_LABEL = 6,
  NNSUB_E_INSUFFICIENT_SAMPLES = 7,
  NNSUB_E_CONFIG = 8,
  NNSUB_E_IO = 9,
  NNSUB_E_INVALID_ARGUMENT = 10,
  NNSUB_E_INTERNAL = 99
} nnsub_status;

typedef enum nnsub_method {
  NNSUB_METHOD_SVD = 0,
  NNSUB_METHOD_NMF = 1,
  NNSUB_METHOD_DNMF = 2,
  NNSUB_METHOD_SCNMFS = 3
} nnsub_method;

typedef struct nnsub_matrix nnsub_matrix;
typedef struct nnsub_dataset nnsub_dataset;
typedef struct nnsub_model nnsub_model;
typedef struct nnsub_head nnsub_head;
typedef struct nnsub_fmap nnsub_fmap;
typedef struct nnsub_amap nnsub_amap;

NNSUB_API const char* nnsub_version(void);
NNSUB_API const char* nnsub_status_name(nnsub_status status);
NNSUB_API const char* nnsub_last_error(void);
NNSUB_API void nnsub_string_free(char* s);

/* method names: "svd", "nmf", "dnmf", "scnmfs" (case-insensitive) */
NNSUB_API nnsub_status nnsub_method_parse(const char* name, nnsub_method* out);
NNSUB_API const char* nnsub_method_name(nnsub_method method);

/* ---- matrices (row-major exchange) ---- */
NNSUB_API nnsub_status nnsub_matrix_create(size_t rows, size_t cols, const double* row_major,
                                           nnsub_matrix** out);
NNSUB_API nnsub_status nnsub_matrix_load(const char* path, nnsub_matrix** out);
NNSUB_API nnsub_status nnsub_matrix_save(const nnsub_matrix* m, const char* path);
NNSUB_API size_t nnsub_matrix_rows(const nnsub_matrix* m);
NNSUB_API size_t nnsub_matrix_cols(const nnsub_matrix* m);
/* Copies rows*cols values into row_major; len must be >= rows*cols. */
NNSUB_API nnsub_status nnsub_matrix_read(const nnsub_matrix* m, double* row_major, size_t len);
NNSUB_API void nnsub_matrix_free(nnsub_matrix* m);

/* ---- feature datasets ---- */
/* features is row-major dims x samples (one column per sample). */
NNSUB_API nnsub_status nnsub_dataset_create(size_t dims, size_t samples, const double* features,
                                            const int* labels, int classes, nnsub_dataset** out);
NNSUB_API nnsub_status nnsub_dataset_load(const char* path, nnsub_dataset** out);
NNSUB_API nnsub_status nnsub_dataset_save(const nnsub_dataset* d, const char* path);
NNSUB_API size_t nnsub_dataset_dims(const nnsub_dataset* d);
NNSUB_API size_t nnsub_dataset_samples(const nnsub_dataset* d);
NNSUB_API int nnsub_dataset_classes(const nnsub_dataset* d);
NNSUB_API int nnsub_dataset_nonneg(const nnsub_dataset* d);
NNSUB_API nnsub_status nnsub_dataset_labels(const nnsub_dataset* d, int* labels, size_t len);
NNSUB_API nnsub_status nnsub_dataset_features(const nnsub_dataset* d, nnsub_matrix** out);
/* Two well-separated Gaussian-like classes shifted to be non-negative. */
NNSUB_API nnsub_status nnsub_dataset_synthetic(size_t dims, size_t samples_per_class,
                                               int classes, double separation, uint64_t seed,
                                               nnsub_dataset** out);
NNSUB_API void nnsub_dataset_free(nnsub_dataset* d);

/* ---- factorisation ---- */
typedef struct nnsub_fit_params {
  nnsub_method method;
  int k;
  double alpha; /* DNMF, >= 0 */
  double beta;  /* SCNMFS, in (0, 1) */
  int iters;
  double tol;
  double eps;
  uint64_t seed;
} nnsub_fit_params;

NNSUB_API void nnsub_fit_params_init(nnsub_fit_params* params);

/* labels may be NULL for SVD / NMF. */
NNSUB_API nnsub_status nnsub_fit(const nnsub_matrix* X, const int* labels, size_t n_labels,
                                 int classes, const nnsub_fit_params* params, nnsub_model** out);
NNSUB_API nnsub_status nnsub_fit_dataset(const nnsub_dataset* data,
                                         const nnsub_fit_params* params, nnsub_model** out);
NNSUB_API nnsub_status nnsub_project(const nnsub_model* model, const nnsub_matrix* X_test,
                                     int iters, double tol, uint64_t seed, nnsub_matrix** out);
NNSUB_API nnsub_status nnsub_reconstruction_error(const nnsub_matrix* X, const nnsub_model* model,
                                                  double* out);

NNSUB_API nnsub_status nnsub_model_load(const char* path, nnsub_model** out);
NNSUB_API nnsub_status nnsub_model_from_json(const char* json, nnsub_model** out);
NNSUB_API nnsub_status nnsub_model_to_json(const nnsub_model* model, char** out);
NNSUB_API nnsub_method nnsub_model_method(const nnsub_model* model);
NNSUB_API int nnsub_model_k(const nnsub_model* model);
NNSUB_API nnsub_status nnsub_model_U(const nnsub_model* model, nnsub_matrix** out);
NNSUB_API nnsub_status nnsub_model_V(const nnsub_model* model, nnsub_matrix** out);
NNSUB_API size_t nnsub_model_trace_length(const nnsub_model* model);
NNSUB_API nnsub_status nnsub_model_trace(const nnsub_model* model, double* out, size_t len);
NNSUB_API void nnsub_model_free(nnsub_model* model);

/* ---- evaluation ---- */
typedef enum nnsub_protocol { NNSUB_PROTOCOL_RESAMPLE = 0, NNSUB_PROTOCOL_EPISODE = 1 } nnsub_protocol;
typedef enum nnsub_classifier { NNSUB_CLASSIFIER_KNN = 0, NNSUB_CLASSIFIER_LINEAR = 1 } nnsub_classifier;
typedef enum nnsub_distance { NNSUB_DISTANCE_EUCLIDEAN = 0, NNSUB_DISTANCE_COSINE = 1 } nnsub_distance;

typedef struct nnsub_eval_params {
  nnsub_fit_params fit;
  int knn_k;
  int repeats;
  nnsub_distance distance;
  nnsub_classifier classifier;
  int head_epochs;
  double head_lr;
  int standardize;
  int resample;
  nnsub_protocol protocol;
  int ways;
  int shots;
  int query_per_class;
  int threads;
} nnsub_eval_params;

NNSUB_API void nnsub_eval_params_init(nnsub_eval_params* params);

/* For NNSUB_PROTOCOL_EPISODE only train is used (test may be NULL).
 * report_json / report_tsv may each be NULL. */
NNSUB_API nnsub_status nnsub_evaluate(const nnsub_dataset* train, const nnsub_dataset* test,
                                      const nnsub_eval_params* params, char** report_json,
                                      char** report_tsv);

/* ---- analysis ---- */
/* ridge < 0 selects the default 1e-8 * trace / dim per side. */
NNSUB_API nnsub_status nnsub_cca(const nnsub_matrix* X1, const nnsub_matrix* X2, double ridge,
                                 char** json);
NNSUB_API nnsub_status nnsub_hoyer_sparsity(const nnsub_matrix* m, double* out);
/* CCA of U (over features) and V (over samples), column matching of U and
 * sparsity reports of both models, as one JSON document. */
NNSUB_API nnsub_status nnsub_compare(const nnsub_model* a, const nnsub_model* b, double ridge,
                                     char** json);

/* ---- linear head and CAM ---- */
NNSUB_API nnsub_status nnsub_head_train(const nnsub_model* model, const int* labels, size_t n,
                                        int classes, int epochs, double lr, uint64_t seed,
                                        nnsub_head** out);
NNSUB_API nnsub_status nnsub_head_load(const char* path, nnsub_head** out);
NNSUB_API nnsub_status nnsub_head_to_json(const nnsub_head* head, char** out);
NNSUB_API void nnsub_head_free(nnsub_head* head);

NNSUB_API nnsub_status nnsub_fmap_load(const char* path, nnsub_fmap** out);
NNSUB_API size_t nnsub_fmap_channels(const nnsub_fmap* fmap);
NNSUB_API void nnsub_fmap_free(nnsub_fmap* fmap);

/* feature_vec may be NULL, in which case the spatial mean of each channel
 * is used. */
NNSUB_API nnsub_status nnsub_cam_generate(const nnsub_fmap* fmap, const double* feature_vec,
                                          size_t len, const nnsub_model* model,
                                          const nnsub_head* head, int out_h, int out_w,
                                          int projection_iters, uint64_t seed, nnsub_amap** out);
NNSUB_API int nnsub_amap_predicted_class(const nnsub_amap* map);
NNSUB_API double nnsub_amap_class_score(const nnsub_amap* map);
NNSUB_API int nnsub_amap_is_constant(const nnsub_amap* map);
NNSUB_API nnsub_status nnsub_amap_values(const nnsub_amap* map, nnsub_matrix** out);
NNSUB_API nnsub_status nnsub_amap_sidecar_json(const nnsub_amap* map, char** out);
/* Any path may be NULL to skip that output. */
NNSUB_API nnsub_status nnsub_amap_write(const nnsub_amap* map, const char* csv_path,
                                        const char* json_path, const char* pgm_path);
NNSUB_API void nnsub_amap_free(nnsub_amap* map);

#ifdef __cplusplus
}
#endif

#endif /* NNSUB_NNSUB_H */
