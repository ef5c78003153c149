// Exercises the shared library through nnsub.h only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnsub/nnsub.h"

namespace {

using nlohmann::json;

std::string scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "nnsub_capi_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string take(char* s) {
  std::string out = s;
  nnsub_string_free(s);
  return out;
}

std::vector<double> read_all(const nnsub_matrix* m) {
  std::vector<double> v(nnsub_matrix_rows(m) * nnsub_matrix_cols(m));
  REQUIRE(nnsub_matrix_read(m, v.data(), v.size()) == NNSUB_OK);
  return v;
}

nnsub_matrix* positive_matrix(size_t rows, size_t cols, unsigned seed) {
  std::vector<double> v(rows * cols);
  unsigned x = seed;
  for (double& d : v) {
    x = x * 1103515245u + 12345u;
    d = 0.05 + static_cast<double>((x >> 8) % 1000) / 1000.0;
  }
  nnsub_matrix* m = nullptr;
  REQUIRE(nnsub_matrix_create(rows, cols, v.data(), &m) == NNSUB_OK);
  return m;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(nnsub_version()) == "0.1.0");
  CHECK(std::string(nnsub_status_name(NNSUB_E_DIMENSION)) == "DimensionError");
  CHECK(std::string(nnsub_status_name(NNSUB_E_INSUFFICIENT_SAMPLES)) == "InsufficientSamplesError");
  nnsub_method m;
  CHECK(nnsub_method_parse("DNMF", &m) == NNSUB_OK);
  CHECK(m == NNSUB_METHOD_DNMF);
  CHECK(nnsub_method_parse("ica", &m) == NNSUB_E_CONFIG);
  CHECK(std::string(nnsub_last_error()).find("ica") != std::string::npos);
  CHECK(std::string(nnsub_method_name(NNSUB_METHOD_SCNMFS)) == "scnmfs");
}

TEST_CASE("matrix round trip through a file") {
  const double values[] = {1, 2, 3, 4, 5, 6};
  nnsub_matrix* m = nullptr;
  REQUIRE(nnsub_matrix_create(2, 3, values, &m) == NNSUB_OK);
  CHECK(nnsub_matrix_rows(m) == 2);
  CHECK(nnsub_matrix_cols(m) == 3);
  REQUIRE(nnsub_matrix_save(m, scratch("m.csv").c_str()) == NNSUB_OK);
  nnsub_matrix* back = nullptr;
  REQUIRE(nnsub_matrix_load(scratch("m.csv").c_str(), &back) == NNSUB_OK);
  CHECK(read_all(back) == std::vector<double>(values, values + 6));
  double small[2];
  CHECK(nnsub_matrix_read(back, small, 2) == NNSUB_E_INVALID_ARGUMENT);
  nnsub_matrix_free(m);
  nnsub_matrix_free(back);
  nnsub_matrix* none = nullptr;
  CHECK(nnsub_matrix_load(scratch("missing.csv").c_str(), &none) == NNSUB_E_IO);
  CHECK(none == nullptr);
}

TEST_CASE("fit errors map to status codes") {
  nnsub_matrix* X = positive_matrix(4, 5, 1);
  nnsub_fit_params p;
  nnsub_fit_params_init(&p);
  CHECK(p.k == 30);
  CHECK(p.iters == 3000);
  p.method = NNSUB_METHOD_NMF;
  p.k = 0;
  nnsub_model* model = nullptr;
  CHECK(nnsub_fit(X, nullptr, 0, 0, &p, &model) == NNSUB_E_DIMENSION);
  p.k = 2;
  p.method = NNSUB_METHOD_DNMF;
  CHECK(nnsub_fit(X, nullptr, 0, 0, &p, &model) == NNSUB_E_CONFIG);
  const int labels[] = {0, 1, 0};
  CHECK(nnsub_fit(X, labels, 3, 2, &p, &model) == NNSUB_E_LABEL_MISMATCH);
  const int bad[] = {0, 1, 0, 5, 1};
  CHECK(nnsub_fit(X, bad, 5, 2, &p, &model) == NNSUB_E_LABEL);
  CHECK(nnsub_fit(nullptr, nullptr, 0, 0, &p, &model) == NNSUB_E_INVALID_ARGUMENT);

  const double neg[] = {1, -1, 1, 1};
  nnsub_matrix* N = nullptr;
  REQUIRE(nnsub_matrix_create(2, 2, neg, &N) == NNSUB_OK);
  p.method = NNSUB_METHOD_NMF;
  p.k = 1;
  CHECK(nnsub_fit(N, nullptr, 0, 0, &p, &model) == NNSUB_E_NONNEGATIVITY);
  nnsub_matrix_free(N);
  nnsub_matrix_free(X);
}

TEST_CASE("dnmf with alpha zero equals nmf through the C layer") {
  nnsub_matrix* X = positive_matrix(8, 6, 7);
  const int labels[] = {0, 1, 0, 1, 1, 0};
  nnsub_fit_params p;
  nnsub_fit_params_init(&p);
  p.k = 2;
  p.iters = 100;
  p.seed = 3;
  p.method = NNSUB_METHOD_NMF;
  nnsub_model* a = nullptr;
  REQUIRE(nnsub_fit(X, nullptr, 0, 0, &p, &a) == NNSUB_OK);
  p.method = NNSUB_METHOD_DNMF;
  p.alpha = 0.0;
  nnsub_model* b = nullptr;
  REQUIRE(nnsub_fit(X, labels, 6, 2, &p, &b) == NNSUB_OK);
  nnsub_matrix *ua, *ub, *va, *vb;
  nnsub_model_U(a, &ua);
  nnsub_model_U(b, &ub);
  nnsub_model_V(a, &va);
  nnsub_model_V(b, &vb);
  const auto UA = read_all(ua), UB = read_all(ub), VA = read_all(va), VB = read_all(vb);
  CHECK(std::memcmp(UA.data(), UB.data(), UA.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(VA.data(), VB.data(), VA.size() * sizeof(double)) == 0);
  CHECK(nnsub_model_trace_length(a) == 101);
  for (auto* m : {ua, ub, va, vb}) nnsub_matrix_free(m);
  nnsub_model_free(a);
  nnsub_model_free(b);
  nnsub_matrix_free(X);
}

TEST_CASE("model json, projection and reconstruction") {
  nnsub_matrix* X = positive_matrix(7, 9, 11);
  nnsub_fit_params p;
  nnsub_fit_params_init(&p);
  p.method = NNSUB_METHOD_SVD;
  p.k = 3;
  nnsub_model* m = nullptr;
  REQUIRE(nnsub_fit(X, nullptr, 0, 0, &p, &m) == NNSUB_OK);
  CHECK(nnsub_model_method(m) == NNSUB_METHOD_SVD);
  CHECK(nnsub_model_k(m) == 3);

  char* text = nullptr;
  REQUIRE(nnsub_model_to_json(m, &text) == NNSUB_OK);
  const json doc = json::parse(take(text));
  CHECK(doc.at("method") == "svd");
  CHECK(doc.at("sigma").size() == 3);

  nnsub_model* back = nullptr;
  REQUIRE(nnsub_model_from_json(doc.dump().c_str(), &back) == NNSUB_OK);
  nnsub_matrix* v = nullptr;
  REQUIRE(nnsub_project(back, X, 0, 0.0, 0, &v) == NNSUB_OK);
  nnsub_matrix* v0 = nullptr;
  nnsub_model_V(m, &v0);
  CHECK(read_all(v) == read_all(v0));

  double err = -1.0;
  REQUIRE(nnsub_reconstruction_error(X, m, &err) == NNSUB_OK);
  CHECK(err >= 0.0);
  CHECK(err < 1.0);

  CHECK(nnsub_model_from_json("{", &back) == NNSUB_E_PARSE);
  nnsub_matrix* wrong = positive_matrix(3, 2, 1);
  nnsub_matrix* out = nullptr;
  CHECK(nnsub_project(m, wrong, 10, 0.0, 0, &out) == NNSUB_E_DIMENSION);
  for (auto* mm : {X, v, v0, wrong}) nnsub_matrix_free(mm);
  nnsub_model_free(m);
  nnsub_model_free(back);
}

TEST_CASE("evaluate and compare") {
  nnsub_dataset* pool = nullptr;
  REQUIRE(nnsub_dataset_synthetic(16, 20, 2, 20.0, 5, &pool) == NNSUB_OK);
  CHECK(nnsub_dataset_nonneg(pool) == 1);
  CHECK(nnsub_dataset_classes(pool) == 2);
  REQUIRE(nnsub_dataset_save(pool, scratch("pool.csv").c_str()) == NNSUB_OK);

  nnsub_eval_params e;
  nnsub_eval_params_init(&e);
  CHECK(e.knn_k == 5);
  CHECK(e.repeats == 10);
  e.fit.method = NNSUB_METHOD_SCNMFS;
  e.fit.k = 2;
  e.fit.iters = 200;
  e.repeats = 3;
  e.protocol = NNSUB_PROTOCOL_EPISODE;
  e.shots = 5;
  e.query_per_class = 5;
  char* report = nullptr;
  char* tsv = nullptr;
  REQUIRE(nnsub_evaluate(pool, nullptr, &e, &report, &tsv) == NNSUB_OK);
  const json r = json::parse(take(report));
  CHECK(r.at("per_run_accuracy").size() == 3);
  CHECK(r.at("mean").get<double>() > 0.95);
  CHECK(take(tsv).rfind("scnmfs\t2\t", 0) == 0);

  e.protocol = NNSUB_PROTOCOL_RESAMPLE;
  CHECK(nnsub_evaluate(pool, nullptr, &e, nullptr, nullptr) == NNSUB_E_INVALID_ARGUMENT);
  e.fit.method = NNSUB_METHOD_NMF;
  e.standardize = 1;
  CHECK(nnsub_evaluate(pool, pool, &e, nullptr, nullptr) == NNSUB_E_CONFIG);

  nnsub_fit_params p;
  nnsub_fit_params_init(&p);
  p.k = 3;
  p.iters = 100;
  nnsub_model *a = nullptr, *b = nullptr;
  p.method = NNSUB_METHOD_SVD;
  REQUIRE(nnsub_fit_dataset(pool, &p, &a) == NNSUB_OK);
  p.method = NNSUB_METHOD_NMF;
  REQUIRE(nnsub_fit_dataset(pool, &p, &b) == NNSUB_OK);
  char* cmp = nullptr;
  REQUIRE(nnsub_compare(a, b, -1.0, &cmp) == NNSUB_OK);
  const json c = json::parse(take(cmp));
  CHECK(c.at("cca_V").at("correlations").size() == 3);
  CHECK(c.at("sparsity").size() == 2);
  REQUIRE(nnsub_compare(a, a, 0.0, &cmp) == NNSUB_OK);
  const json self = json::parse(take(cmp));
  for (double v : self.at("cca_V").at("correlations")) CHECK(std::abs(v - 1.0) < 1e-8);
  nnsub_model_free(a);
  nnsub_model_free(b);
  nnsub_dataset_free(pool);
}

TEST_CASE("cam through handles") {
  nnsub_dataset* data = nullptr;
  REQUIRE(nnsub_dataset_synthetic(4, 10, 2, 10.0, 2, &data) == NNSUB_OK);
  nnsub_fit_params p;
  nnsub_fit_params_init(&p);
  p.method = NNSUB_METHOD_NMF;
  p.k = 2;
  p.iters = 100;
  nnsub_model* model = nullptr;
  REQUIRE(nnsub_fit_dataset(data, &p, &model) == NNSUB_OK);
  std::vector<int> labels(nnsub_dataset_samples(data));
  REQUIRE(nnsub_dataset_labels(data, labels.data(), labels.size()) == NNSUB_OK);
  nnsub_head* head = nullptr;
  REQUIRE(nnsub_head_train(model, labels.data(), labels.size(), 2, 200, 0.1, 0, &head) == NNSUB_OK);

  const std::string fmap_text =
      "# channels=4 height=2 width=2\n"
      "1,2\n3,4\n0,0\n1,0\n2,2\n2,2\n5,1\n0,3\n";
  const std::string path = scratch("fmap.txt");
  FILE* f = std::fopen(path.c_str(), "w");
  std::fputs(fmap_text.c_str(), f);
  std::fclose(f);
  nnsub_fmap* fmap = nullptr;
  REQUIRE(nnsub_fmap_load(path.c_str(), &fmap) == NNSUB_OK);
  CHECK(nnsub_fmap_channels(fmap) == 4);

  nnsub_amap* amap = nullptr;
  REQUIRE(nnsub_cam_generate(fmap, nullptr, 0, model, head, 8, 6, 100, 0, &amap) == NNSUB_OK);
  nnsub_matrix* values = nullptr;
  REQUIRE(nnsub_amap_values(amap, &values) == NNSUB_OK);
  CHECK(nnsub_matrix_rows(values) == 8);
  CHECK(nnsub_matrix_cols(values) == 6);
  const int cls = nnsub_amap_predicted_class(amap);
  CHECK((cls == 0 || cls == 1));
  CHECK(nnsub_amap_class_score(amap) >= 0.5);
  REQUIRE(nnsub_amap_write(amap, scratch("cam.csv").c_str(), scratch("cam.json").c_str(),
                           scratch("cam.pgm").c_str()) == NNSUB_OK);
  CHECK(std::filesystem::file_size(scratch("cam.pgm")) > 48);

  const double short_vec[] = {1.0, 2.0};
  nnsub_amap* none = nullptr;
  CHECK(nnsub_cam_generate(fmap, short_vec, 2, model, head, 8, 6, 10, 0, &none) == NNSUB_E_DIMENSION);

  nnsub_matrix_free(values);
  nnsub_amap_free(amap);
  nnsub_fmap_free(fmap);
  nnsub_head_free(head);
  nnsub_model_free(model);
  nnsub_dataset_free(data);
}

TEST_CASE("analysis entry points") {
  nnsub_matrix* X = positive_matrix(3, 40, 9);
  char* text = nullptr;
  REQUIRE(nnsub_cca(X, X, 0.0, &text) == NNSUB_OK);
  const json r = json::parse(take(text));
  CHECK(std::abs(r.at("mean_correlation").get<double>() - 1.0) < 1e-8);
  double h = -1.0;
  REQUIRE(nnsub_hoyer_sparsity(X, &h) == NNSUB_OK);
  CHECK(h >= 0.0);
  CHECK(h <= 1.0);
  nnsub_matrix* Y = positive_matrix(3, 39, 9);
  CHECK(nnsub_cca(X, Y, 0.0, &text) == NNSUB_E_DIMENSION);
  nnsub_matrix_free(X);
  nnsub_matrix_free(Y);
}
