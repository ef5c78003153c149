#include "nnsub/nnsub.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "nnsub/analysis.hpp"
#include "nnsub/cam.hpp"
#include "nnsub/error.hpp"
#include "nnsub/factorize.hpp"
#include "nnsub/fewshot.hpp"
#include "nnsub/io.hpp"

struct nnsub_matrix {
  nnsub::Matrix value;
};
struct nnsub_dataset {
  nnsub::FeatureDataset value;
};
struct nnsub_model {
  nnsub::FactorModel value;
};
struct nnsub_head {
  nnsub::LinearHead value;
};
struct nnsub_fmap {
  nnsub::FeatureMapStack value;
};
struct nnsub_amap {
  nnsub::ActivationMap value;
  std::string source_id;
};

namespace {

thread_local std::string last_error;

nnsub_status fail(nnsub_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs body, translating exceptions into status codes.
template <typename Body>
nnsub_status guarded(Body&& body) {
  try {
    body();
    return NNSUB_OK;
  } catch (const nnsub::Error& e) {
    return fail(static_cast<nnsub_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(NNSUB_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(NNSUB_E_INTERNAL, e.what());
  } catch (...) {
    return fail(NNSUB_E_INTERNAL, "unknown exception");
  }
}

#define NNSUB_REQUIRE(cond, what)                                   \
  do {                                                              \
    if (!(cond)) return fail(NNSUB_E_INVALID_ARGUMENT, what);       \
  } while (0)

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nnsub::Matrix from_row_major(std::size_t rows, std::size_t cols, const double* data) {
  nnsub::Matrix m(static_cast<nnsub::Index>(rows), static_cast<nnsub::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<nnsub::Index>(i), static_cast<nnsub::Index>(j)) = data[i * cols + j];
  return m;
}

nnsub::Method to_method(nnsub_method m) {
  switch (m) {
    case NNSUB_METHOD_SVD: return nnsub::Method::SVD;
    case NNSUB_METHOD_NMF: return nnsub::Method::NMF;
    case NNSUB_METHOD_DNMF: return nnsub::Method::DNMF;
    case NNSUB_METHOD_SCNMFS: return nnsub::Method::SCNMFS;
  }
  throw nnsub::ConfigError("invalid method value");
}

nnsub_method from_method(nnsub::Method m) {
  switch (m) {
    case nnsub::Method::SVD: return NNSUB_METHOD_SVD;
    case nnsub::Method::NMF: return NNSUB_METHOD_NMF;
    case nnsub::Method::DNMF: return NNSUB_METHOD_DNMF;
    case nnsub::Method::SCNMFS: return NNSUB_METHOD_SCNMFS;
  }
  return NNSUB_METHOD_SVD;
}

nnsub::Hyper to_hyper(const nnsub_fit_params& p) {
  nnsub::Hyper h;
  h.alpha = p.alpha;
  h.beta = p.beta;
  h.iters = p.iters;
  h.tol = p.tol;
  h.eps = p.eps;
  return h;
}

nnsub_status fit_impl(const nnsub::Matrix& X, const int* labels, std::size_t n_labels,
                      int classes, const nnsub_fit_params* params, nnsub_model** out) {
  return guarded([&] {
    const nnsub::Method method = to_method(params->method);
    std::optional<nnsub::LabelMatrix> q;
    if (labels) {
      q.emplace(std::span<const int>(labels, n_labels), classes);
    }
    auto model = std::make_unique<nnsub_model>();
    model->value = nnsub::fit(method, X, q ? &*q : nullptr, params->k, to_hyper(*params),
                              params->seed);
    *out = model.release();
  });
}

}  // namespace

extern "C" {

const char* nnsub_version(void) { return "0.1.0"; }

const char* nnsub_status_name(nnsub_status status) {
  switch (status) {
    case NNSUB_OK: return "OK";
    case NNSUB_E_INVALID_ARGUMENT: return "InvalidArgument";
    case NNSUB_E_INTERNAL: return "InternalError";
    default: break;
  }
  const int code = static_cast<int>(status);
  if (code >= 1 && code <= 9) {
    return nnsub::error_code_name(static_cast<nnsub::ErrorCode>(code)).data();
  }
  return "UnknownStatus";
}

const char* nnsub_last_error(void) { return last_error.c_str(); }

void nnsub_string_free(char* s) { std::free(s); }

nnsub_status nnsub_method_parse(const char* name, nnsub_method* out) {
  NNSUB_REQUIRE(name && out, "null argument");
  return guarded([&] { *out = from_method(nnsub::parse_method(name)); });
}

const char* nnsub_method_name(nnsub_method method) {
  try {
    return nnsub::method_name(to_method(method)).data();
  } catch (...) {
    return "unknown";
  }
}

// ---- matrices ----

nnsub_status nnsub_matrix_create(size_t rows, size_t cols, const double* row_major,
                                 nnsub_matrix** out) {
  NNSUB_REQUIRE(out && row_major, "null argument");
  NNSUB_REQUIRE(rows > 0 && cols > 0, "matrix dimensions must be positive");
  return guarded([&] {
    auto m = std::make_unique<nnsub_matrix>();
    m->value = from_row_major(rows, cols, row_major);
    *out = m.release();
  });
}

nnsub_status nnsub_matrix_load(const char* path, nnsub_matrix** out) {
  NNSUB_REQUIRE(path && out, "null argument");
  return guarded([&] {
    auto m = std::make_unique<nnsub_matrix>();
    m->value = nnsub::io::read_matrix(path);
    *out = m.release();
  });
}

nnsub_status nnsub_matrix_save(const nnsub_matrix* m, const char* path) {
  NNSUB_REQUIRE(m && path, "null argument");
  return guarded([&] { nnsub::io::write_matrix(path, m->value); });
}

size_t nnsub_matrix_rows(const nnsub_matrix* m) {
  return m ? static_cast<size_t>(m->value.rows()) : 0;
}

size_t nnsub_matrix_cols(const nnsub_matrix* m) {
  return m ? static_cast<size_t>(m->value.cols()) : 0;
}

nnsub_status nnsub_matrix_read(const nnsub_matrix* m, double* row_major, size_t len) {
  NNSUB_REQUIRE(m && row_major, "null argument");
  const auto rows = static_cast<size_t>(m->value.rows());
  const auto cols = static_cast<size_t>(m->value.cols());
  NNSUB_REQUIRE(len >= rows * cols, "output buffer too small");
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j)
      row_major[i * cols + j] = m->value(static_cast<nnsub::Index>(i), static_cast<nnsub::Index>(j));
  return NNSUB_OK;
}

void nnsub_matrix_free(nnsub_matrix* m) { delete m; }

// ---- datasets ----

nnsub_status nnsub_dataset_create(size_t dims, size_t samples, const double* features,
                                  const int* labels, int classes, nnsub_dataset** out) {
  NNSUB_REQUIRE(features && labels && out, "null argument");
  NNSUB_REQUIRE(dims > 0 && samples > 0 && classes > 0, "dimensions must be positive");
  return guarded([&] {
    auto d = std::make_unique<nnsub_dataset>();
    d->value.features = from_row_major(dims, samples, features);
    d->value.labels.assign(labels, labels + samples);
    d->value.class_names = nnsub::default_class_names(classes);
    d->value.validate();
    *out = d.release();
  });
}

nnsub_status nnsub_dataset_load(const char* path, nnsub_dataset** out) {
  NNSUB_REQUIRE(path && out, "null argument");
  return guarded([&] {
    auto d = std::make_unique<nnsub_dataset>();
    d->value = nnsub::io::load_features(path);
    *out = d.release();
  });
}

nnsub_status nnsub_dataset_save(const nnsub_dataset* d, const char* path) {
  NNSUB_REQUIRE(d && path, "null argument");
  return guarded([&] { nnsub::io::save_features(path, d->value); });
}

size_t nnsub_dataset_dims(const nnsub_dataset* d) {
  return d ? static_cast<size_t>(d->value.dims()) : 0;
}

size_t nnsub_dataset_samples(const nnsub_dataset* d) {
  return d ? static_cast<size_t>(d->value.samples()) : 0;
}

int nnsub_dataset_classes(const nnsub_dataset* d) { return d ? d->value.classes() : 0; }

int nnsub_dataset_nonneg(const nnsub_dataset* d) { return d && d->value.nonneg ? 1 : 0; }

nnsub_status nnsub_dataset_labels(const nnsub_dataset* d, int* labels, size_t len) {
  NNSUB_REQUIRE(d && labels, "null argument");
  NNSUB_REQUIRE(len >= d->value.labels.size(), "output buffer too small");
  std::copy(d->value.labels.begin(), d->value.labels.end(), labels);
  return NNSUB_OK;
}

nnsub_status nnsub_dataset_features(const nnsub_dataset* d, nnsub_matrix** out) {
  NNSUB_REQUIRE(d && out, "null argument");
  return guarded([&] { *out = new nnsub_matrix{d->value.features}; });
}

nnsub_status nnsub_dataset_synthetic(size_t dims, size_t samples_per_class, int classes,
                                     double separation, uint64_t seed, nnsub_dataset** out) {
  NNSUB_REQUIRE(out, "null argument");
  return guarded([&] {
    auto d = std::make_unique<nnsub_dataset>();
    d->value = nnsub::make_gaussian_classes(static_cast<nnsub::Index>(dims),
                                            static_cast<nnsub::Index>(samples_per_class),
                                            classes, separation, seed);
    *out = d.release();
  });
}

void nnsub_dataset_free(nnsub_dataset* d) { delete d; }

// ---- factorisation ----

void nnsub_fit_params_init(nnsub_fit_params* params) {
  if (!params) return;
  const nnsub::Hyper h;
  params->method = NNSUB_METHOD_NMF;
  params->k = 30;
  params->alpha = h.alpha;
  params->beta = h.beta;
  params->iters = h.iters;
  params->tol = h.tol;
  params->eps = h.eps;
  params->seed = 0;
}

nnsub_status nnsub_fit(const nnsub_matrix* X, const int* labels, size_t n_labels, int classes,
                       const nnsub_fit_params* params, nnsub_model** out) {
  NNSUB_REQUIRE(X && params && out, "null argument");
  return fit_impl(X->value, labels, n_labels, classes, params, out);
}

nnsub_status nnsub_fit_dataset(const nnsub_dataset* data, const nnsub_fit_params* params,
                               nnsub_model** out) {
  NNSUB_REQUIRE(data && params && out, "null argument");
  return fit_impl(data->value.features, data->value.labels.data(), data->value.labels.size(),
                  data->value.classes(), params, out);
}

nnsub_status nnsub_project(const nnsub_model* model, const nnsub_matrix* X_test, int iters,
                           double tol, uint64_t seed, nnsub_matrix** out) {
  NNSUB_REQUIRE(model && X_test && out, "null argument");
  return guarded([&] {
    const nnsub::SolverOptions options{iters, tol, model->value.hyper.eps, seed};
    auto m = std::make_unique<nnsub_matrix>();
    m->value = nnsub::project_test(X_test->value, model->value, options);
    *out = m.release();
  });
}

nnsub_status nnsub_reconstruction_error(const nnsub_matrix* X, const nnsub_model* model,
                                        double* out) {
  NNSUB_REQUIRE(X && model && out, "null argument");
  return guarded([&] { *out = nnsub::reconstruction_error(X->value, model->value); });
}

nnsub_status nnsub_model_load(const char* path, nnsub_model** out) {
  NNSUB_REQUIRE(path && out, "null argument");
  return guarded([&] {
    auto m = std::make_unique<nnsub_model>();
    m->value = nnsub::io::load_model(path);
    *out = m.release();
  });
}

nnsub_status nnsub_model_from_json(const char* json, nnsub_model** out) {
  NNSUB_REQUIRE(json && out, "null argument");
  return guarded([&] {
    nnsub::io::json doc;
    try {
      doc = nnsub::io::json::parse(json);
    } catch (const nnsub::io::json::parse_error& e) {
      throw nnsub::ParseError(e.what(), 0);
    }
    auto m = std::make_unique<nnsub_model>();
    m->value = nnsub::io::model_from_json(doc);
    *out = m.release();
  });
}

nnsub_status nnsub_model_to_json(const nnsub_model* model, char** out) {
  NNSUB_REQUIRE(model && out, "null argument");
  return guarded([&] { *out = duplicate(nnsub::io::model_to_json(model->value).dump()); });
}

nnsub_method nnsub_model_method(const nnsub_model* model) {
  return model ? from_method(model->value.method) : NNSUB_METHOD_SVD;
}

int nnsub_model_k(const nnsub_model* model) { return model ? model->value.k : 0; }

nnsub_status nnsub_model_U(const nnsub_model* model, nnsub_matrix** out) {
  NNSUB_REQUIRE(model && out, "null argument");
  return guarded([&] { *out = new nnsub_matrix{model->value.U}; });
}

nnsub_status nnsub_model_V(const nnsub_model* model, nnsub_matrix** out) {
  NNSUB_REQUIRE(model && out, "null argument");
  return guarded([&] { *out = new nnsub_matrix{model->value.V}; });
}

size_t nnsub_model_trace_length(const nnsub_model* model) {
  return model ? model->value.objective_trace.size() : 0;
}

nnsub_status nnsub_model_trace(const nnsub_model* model, double* out, size_t len) {
  NNSUB_REQUIRE(model && out, "null argument");
  const auto& trace = model->value.objective_trace;
  NNSUB_REQUIRE(len >= trace.size(), "output buffer too small");
  std::copy(trace.begin(), trace.end(), out);
  return NNSUB_OK;
}

void nnsub_model_free(nnsub_model* model) { delete model; }

// ---- evaluation ----

void nnsub_eval_params_init(nnsub_eval_params* params) {
  if (!params) return;
  const nnsub::EvalConfig c;
  nnsub_fit_params_init(&params->fit);
  params->fit.method = NNSUB_METHOD_SVD;
  params->fit.k = c.k;
  params->knn_k = c.knn_k;
  params->repeats = c.repeats;
  params->distance = NNSUB_DISTANCE_EUCLIDEAN;
  params->classifier = NNSUB_CLASSIFIER_KNN;
  params->head_epochs = c.head.epochs;
  params->head_lr = c.head.lr;
  params->standardize = 0;
  params->resample = 1;
  params->protocol = NNSUB_PROTOCOL_RESAMPLE;
  params->ways = c.episode.ways;
  params->shots = c.episode.shots;
  params->query_per_class = c.episode.query_per_class;
  params->threads = 1;
}

nnsub_status nnsub_evaluate(const nnsub_dataset* train, const nnsub_dataset* test,
                            const nnsub_eval_params* params, char** report_json,
                            char** report_tsv) {
  NNSUB_REQUIRE(train && params, "null argument");
  NNSUB_REQUIRE(test || params->protocol == NNSUB_PROTOCOL_EPISODE,
                "resample protocol needs a test dataset");
  return guarded([&] {
    nnsub::EvalConfig c;
    c.method = to_method(params->fit.method);
    c.k = params->fit.k;
    c.hyper = to_hyper(params->fit);
    c.seed = params->fit.seed;
    c.knn_k = params->knn_k;
    c.repeats = params->repeats;
    c.distance = params->distance == NNSUB_DISTANCE_COSINE ? nnsub::Distance::Cosine
                                                           : nnsub::Distance::Euclidean;
    c.classifier = params->classifier == NNSUB_CLASSIFIER_LINEAR ? nnsub::Classifier::Linear
                                                                 : nnsub::Classifier::Knn;
    c.head.epochs = params->head_epochs;
    c.head.lr = params->head_lr;
    c.standardize = params->standardize != 0;
    c.resample = params->resample != 0;
    c.protocol = params->protocol == NNSUB_PROTOCOL_EPISODE ? nnsub::Protocol::Episode
                                                            : nnsub::Protocol::Resample;
    c.episode.ways = params->ways;
    c.episode.shots = params->shots;
    c.episode.query_per_class = params->query_per_class;
    c.episode.repeats = params->repeats;
    c.episode.seed = params->fit.seed;
    c.threads = params->threads;

    const nnsub::EvalReport report = c.protocol == nnsub::Protocol::Episode
                                         ? nnsub::evaluate_episodes(train->value, c)
                                         : nnsub::evaluate(train->value, test->value, c);
    std::string json = nnsub::io::report_to_json(report).dump();
    std::string tsv = nnsub::io::report_to_tsv(report);
    if (report_json) *report_json = duplicate(json);
    if (report_tsv) *report_tsv = duplicate(tsv);
  });
}

// ---- analysis ----

nnsub_status nnsub_cca(const nnsub_matrix* X1, const nnsub_matrix* X2, double ridge,
                       char** json) {
  NNSUB_REQUIRE(X1 && X2 && json, "null argument");
  return guarded([&] {
    const auto r = ridge < 0.0 ? std::nullopt : std::optional<double>(ridge);
    *json = duplicate(nnsub::io::cca_to_json(nnsub::cca_similarity(X1->value, X2->value, r)).dump());
  });
}

nnsub_status nnsub_hoyer_sparsity(const nnsub_matrix* m, double* out) {
  NNSUB_REQUIRE(m && out, "null argument");
  return guarded([&] { *out = nnsub::hoyer_sparsity(m->value); });
}

nnsub_status nnsub_compare(const nnsub_model* a, const nnsub_model* b, double ridge,
                           char** json) {
  NNSUB_REQUIRE(a && b && json, "null argument");
  return guarded([&] {
    const auto r = ridge < 0.0 ? std::nullopt : std::optional<double>(ridge);
    const auto& ma = a->value;
    const auto& mb = b->value;
    nnsub::io::json doc;
    doc["methods"] = {std::string(nnsub::method_name(ma.method)),
                      std::string(nnsub::method_name(mb.method))};
    // U rows are features: CCA treats features as paired observations.
    doc["cca_U"] = nnsub::io::cca_to_json(
        nnsub::cca_similarity(ma.U.transpose(), mb.U.transpose(), r));
    doc["cca_V"] = nnsub::io::cca_to_json(
        nnsub::cca_similarity(ma.V.transpose(), mb.V.transpose(), r));
    doc["column_similarity_U"] = nnsub::column_similarity(ma.U, mb.U);
    doc["sparsity"] = nnsub::io::json::array();
    for (const auto* m : {&ma, &mb}) {
      doc["sparsity"].push_back(
          {{"method", std::string(nnsub::method_name(m->method))},
           {"U", nnsub::io::sparsity_to_json(nnsub::sparsity_report(m->U, nnsub::MatrixTag::UTrain))},
           {"V", nnsub::io::sparsity_to_json(nnsub::sparsity_report(m->V, nnsub::MatrixTag::VTrain))}});
    }
    *json = duplicate(doc.dump());
  });
}

// ---- head and CAM ----

nnsub_status nnsub_head_train(const nnsub_model* model, const int* labels, size_t n, int classes,
                              int epochs, double lr, uint64_t seed, nnsub_head** out) {
  NNSUB_REQUIRE(model && labels && out, "null argument");
  return guarded([&] {
    auto h = std::make_unique<nnsub_head>();
    h->value = nnsub::train_linear_head(model->value.V, std::span<const int>(labels, n), classes,
                                        nnsub::HeadOptions{epochs, lr, seed});
    *out = h.release();
  });
}

nnsub_status nnsub_head_load(const char* path, nnsub_head** out) {
  NNSUB_REQUIRE(path && out, "null argument");
  return guarded([&] {
    nnsub::io::json doc;
    try {
      doc = nnsub::io::json::parse(nnsub::io::read_text(path));
    } catch (const nnsub::io::json::parse_error& e) {
      throw nnsub::ParseError(e.what(), 0);
    }
    auto h = std::make_unique<nnsub_head>();
    h->value = nnsub::io::head_from_json(doc);
    *out = h.release();
  });
}

nnsub_status nnsub_head_to_json(const nnsub_head* head, char** out) {
  NNSUB_REQUIRE(head && out, "null argument");
  return guarded([&] { *out = duplicate(nnsub::io::head_to_json(head->value).dump()); });
}

void nnsub_head_free(nnsub_head* head) { delete head; }

nnsub_status nnsub_fmap_load(const char* path, nnsub_fmap** out) {
  NNSUB_REQUIRE(path && out, "null argument");
  return guarded([&] {
    auto f = std::make_unique<nnsub_fmap>();
    f->value = nnsub::io::load_feature_map(path);
    f->value.validate();
    *out = f.release();
  });
}

size_t nnsub_fmap_channels(const nnsub_fmap* fmap) {
  return fmap ? static_cast<size_t>(fmap->value.channels) : 0;
}

void nnsub_fmap_free(nnsub_fmap* fmap) { delete fmap; }

nnsub_status nnsub_cam_generate(const nnsub_fmap* fmap, const double* feature_vec, size_t len,
                                const nnsub_model* model, const nnsub_head* head, int out_h,
                                int out_w, int projection_iters, uint64_t seed,
                                nnsub_amap** out) {
  NNSUB_REQUIRE(fmap && model && head && out, "null argument");
  return guarded([&] {
    nnsub::Vector x = feature_vec
                          ? nnsub::Vector(Eigen::Map<const nnsub::Vector>(
                                feature_vec, static_cast<nnsub::Index>(len)))
                          : fmap->value.pooled();
    const nnsub::SolverOptions projection{projection_iters, 0.0, model->value.hyper.eps, seed};
    auto m = std::make_unique<nnsub_amap>();
    m->value = nnsub::cam_generate(fmap->value, x, model->value, head->value, out_h, out_w,
                                   projection);
    m->source_id = fmap->value.source_id;
    *out = m.release();
  });
}

int nnsub_amap_predicted_class(const nnsub_amap* map) {
  return map ? map->value.predicted_class : -1;
}

double nnsub_amap_class_score(const nnsub_amap* map) {
  return map ? map->value.class_score : std::nan("");
}

int nnsub_amap_is_constant(const nnsub_amap* map) { return map && map->value.constant ? 1 : 0; }

nnsub_status nnsub_amap_values(const nnsub_amap* map, nnsub_matrix** out) {
  NNSUB_REQUIRE(map && out, "null argument");
  return guarded([&] { *out = new nnsub_matrix{map->value.values}; });
}

nnsub_status nnsub_amap_sidecar_json(const nnsub_amap* map, char** out) {
  NNSUB_REQUIRE(map && out, "null argument");
  return guarded(
      [&] { *out = duplicate(nnsub::io::activation_sidecar(map->value, map->source_id).dump()); });
}

nnsub_status nnsub_amap_write(const nnsub_amap* map, const char* csv_path, const char* json_path,
                              const char* pgm_path) {
  NNSUB_REQUIRE(map, "null argument");
  return guarded([&] {
    if (csv_path) nnsub::io::write_matrix(csv_path, map->value.values);
    if (json_path) {
      nnsub::io::write_text(json_path,
                            nnsub::io::activation_sidecar(map->value, map->source_id).dump(1) + "\n");
    }
    if (pgm_path) nnsub::io::write_pgm(pgm_path, map->value.values);
  });
}

void nnsub_amap_free(nnsub_amap* map) { delete map; }

}  // extern "C"
