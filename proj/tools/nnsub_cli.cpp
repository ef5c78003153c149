// nnsub command-line front end. Talks to the library only through nnsub.h.
//
// Exit codes: 0 success, 1 library error (one line "error: <Code>: <msg>"
// on stderr), 2 command-line / configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nnsub/nnsub.h"

namespace {

using nlohmann::json;

struct LibraryError {
  nnsub_status status;
  std::string message;
};

void check(nnsub_status status) {
  if (status != NNSUB_OK) throw LibraryError{status, nnsub_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using MatrixPtr = std::unique_ptr<nnsub_matrix, Deleter<nnsub_matrix, nnsub_matrix_free>>;
using DatasetPtr = std::unique_ptr<nnsub_dataset, Deleter<nnsub_dataset, nnsub_dataset_free>>;
using ModelPtr = std::unique_ptr<nnsub_model, Deleter<nnsub_model, nnsub_model_free>>;
using HeadPtr = std::unique_ptr<nnsub_head, Deleter<nnsub_head, nnsub_head_free>>;
using FmapPtr = std::unique_ptr<nnsub_fmap, Deleter<nnsub_fmap, nnsub_fmap_free>>;
using AmapPtr = std::unique_ptr<nnsub_amap, Deleter<nnsub_amap, nnsub_amap_free>>;

// Takes ownership of a library-allocated string.
std::string take(char* s) {
  std::string out = s ? s : "";
  nnsub_string_free(s);
  return out;
}

DatasetPtr load_dataset(const std::string& path) {
  nnsub_dataset* d = nullptr;
  check(nnsub_dataset_load(path.c_str(), &d));
  return DatasetPtr(d);
}

ModelPtr load_model(const std::string& path) {
  nnsub_model* m = nullptr;
  check(nnsub_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

std::vector<int> labels_of(const nnsub_dataset* d) {
  std::vector<int> labels(nnsub_dataset_samples(d));
  check(nnsub_dataset_labels(d, labels.data(), labels.size()));
  return labels;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LibraryError{NNSUB_E_IO, "cannot open '" + path + "' for writing"};
  out << text;
}

nnsub_method method_from(const std::string& name) {
  nnsub_method m;
  check(nnsub_method_parse(name.c_str(), &m));
  return m;
}

struct FitFlags {
  std::string method = "nmf";
  int k = 30;
  double alpha = 1.0;
  double beta = 0.1;
  int iters = 3000;
  double tol = 0.0;
  double eps = 1e-12;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--method", method, "svd | nmf | dnmf | scnmfs")
        ->check(CLI::IsMember({"svd", "nmf", "dnmf", "scnmfs"}, CLI::ignore_case))
        ->capture_default_str();
    cmd->add_option("--k", k, "Subspace dimension")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--alpha", alpha, "DNMF label weight (>= 0)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--beta", beta, "SCNMFS penalty on U, in (0, 1)")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--iters", iters, "Multiplicative-update sweeps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--tol", tol, "Relative objective change for early stop (0 = off)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--eps", eps, "Denominator guard")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();
  }

  void validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw CLI::ValidationError("--beta", "must lie strictly inside (0, 1)");
  }

  nnsub_fit_params params() const {
    nnsub_fit_params p;
    nnsub_fit_params_init(&p);
    p.method = method_from(method);
    p.k = k;
    p.alpha = alpha;
    p.beta = beta;
    p.iters = iters;
    p.tol = tol;
    p.eps = eps;
    p.seed = seed;
    return p;
  }

  json to_json() const {
    return {{"method", method}, {"k", k},     {"alpha", alpha}, {"beta", beta},
            {"iters", iters},   {"tol", tol}, {"eps", eps},     {"seed", seed}};
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Subspace factorisation and few-shot evaluation over feature vectors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(nnsub_version()));

  // factorize
  FitFlags fit_flags;
  std::string fz_features, fz_matrix, fz_output;
  auto* factorize = app.add_subcommand("factorize", "Fit a subspace model and write it as JSON");
  fit_flags.attach(factorize);
  auto* fz_group = factorize->add_option_group("input");
  fz_group->add_option("--features", fz_features, "Labelled feature file")->check(CLI::ExistingFile);
  fz_group->add_option("--matrix", fz_matrix, "Unlabelled matrix file (svd / nmf only)")
      ->check(CLI::ExistingFile);
  fz_group->require_option(1);
  factorize->add_option("--output,-o", fz_output, "Model JSON path ('-' for stdout)")->required();

  // project
  std::string pj_model, pj_features, pj_matrix, pj_output;
  int pj_iters = 3000;
  double pj_tol = 0.0;
  std::uint64_t pj_seed = 0;
  auto* project = app.add_subcommand("project", "Project test features with a frozen model");
  project->add_option("--model", pj_model, "Model JSON")->required()->check(CLI::ExistingFile);
  auto* pj_group = project->add_option_group("input");
  pj_group->add_option("--features", pj_features, "Feature file")->check(CLI::ExistingFile);
  pj_group->add_option("--matrix", pj_matrix, "Matrix file (columns are samples)")->check(CLI::ExistingFile);
  pj_group->require_option(1);
  project->add_option("--iters", pj_iters, "V-update sweeps")->check(CLI::NonNegativeNumber)->capture_default_str();
  project->add_option("--tol", pj_tol, "Early-stop tolerance")->check(CLI::NonNegativeNumber)->capture_default_str();
  project->add_option("--seed", pj_seed, "Seed for V_test initialisation")->capture_default_str();
  project->add_option("--output,-o", pj_output, "Output matrix (N_test x k)")->required();

  // evaluate
  FitFlags ev_fit;
  ev_fit.method = "svd";
  std::string ev_train, ev_test, ev_data, ev_output, ev_format = "json", ev_protocol = "resample",
              ev_classifier = "knn", ev_distance = "euclidean";
  int ev_K = 5, ev_repeats = 10, ev_ways = 2, ev_shots = 10, ev_query = 10, ev_threads = 1,
      ev_head_epochs = 500;
  double ev_head_lr = 0.1;
  bool ev_standardize = false, ev_no_resample = false, ev_permute = false;
  auto* evaluate = app.add_subcommand("evaluate", "Repeated fit / project / classify accuracy");
  ev_fit.attach(evaluate);
  evaluate->add_option("--train", ev_train, "Training feature file")->check(CLI::ExistingFile);
  evaluate->add_option("--test", ev_test, "Test feature file")->check(CLI::ExistingFile);
  evaluate->add_option("--data", ev_data, "Pooled feature file for the episode protocol")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--protocol", ev_protocol, "resample | episode")
      ->check(CLI::IsMember({"resample", "episode"}))
      ->capture_default_str();
  evaluate->add_option("--K", ev_K, "KNN neighbours")->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_option("--repeats", ev_repeats, "Repeated samplings")->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_option("--classifier", ev_classifier, "knn | linear")
      ->check(CLI::IsMember({"knn", "linear"}))
      ->capture_default_str();
  evaluate->add_option("--distance", ev_distance, "euclidean | cosine")
      ->check(CLI::IsMember({"euclidean", "cosine"}))
      ->capture_default_str();
  evaluate->add_option("--head-epochs", ev_head_epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  evaluate->add_option("--head-lr", ev_head_lr)->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_flag("--standardize", ev_standardize, "Z-score features with train statistics");
  evaluate->add_flag("--no-resample", ev_no_resample, "Keep the given train/test split every repeat");
  evaluate->add_flag("--permute-labels", ev_permute, "Shuffle labels first (chance-level control)");
  evaluate->add_option("--ways", ev_ways, "Episode classes")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  evaluate->add_option("--shots", ev_shots, "Support samples per class")->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_option("--query", ev_query, "Query samples per class")->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_option("--threads", ev_threads, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  evaluate->add_option("--format", ev_format, "json | tsv")->check(CLI::IsMember({"json", "tsv"}))->capture_default_str();
  evaluate->add_option("--output,-o", ev_output, "Report path (default stdout)");

  // compare
  std::string cp_a, cp_b, cp_output;
  double cp_ridge = -1.0;
  auto* compare = app.add_subcommand("compare", "CCA and sparsity comparison of two models");
  compare->add_option("--model-a", cp_a)->required()->check(CLI::ExistingFile);
  compare->add_option("--model-b", cp_b)->required()->check(CLI::ExistingFile);
  compare->add_option("--ridge", cp_ridge, "Covariance ridge (negative = 1e-8 * trace / dim)")
      ->capture_default_str();
  compare->add_option("--output,-o", cp_output, "Report path (default stdout)");

  // cam
  std::string cam_model, cam_head, cam_train, cam_fmap, cam_feature, cam_csv, cam_json, cam_pgm,
      cam_head_out;
  int cam_h = 224, cam_w = 224, cam_iters = 3000, cam_epochs = 500;
  double cam_lr = 0.1;
  std::uint64_t cam_seed = 0;
  auto* cam = app.add_subcommand("cam", "Class activation map through the subspace");
  cam->add_option("--model", cam_model, "Model JSON")->required()->check(CLI::ExistingFile);
  auto* head_group = cam->add_option_group("head");
  head_group->add_option("--head", cam_head, "Linear head JSON")->check(CLI::ExistingFile);
  head_group->add_option("--train", cam_train, "Training feature file; a head is fitted on model V")
      ->check(CLI::ExistingFile);
  head_group->require_option(1);
  cam->add_option("--fmap", cam_fmap, "Feature-map file")->required()->check(CLI::ExistingFile);
  cam->add_option("--feature", cam_feature, "Feature vector as a c x 1 matrix file (default: pooled map)")
      ->check(CLI::ExistingFile);
  cam->add_option("--out-h", cam_h)->check(CLI::PositiveNumber)->capture_default_str();
  cam->add_option("--out-w", cam_w)->check(CLI::PositiveNumber)->capture_default_str();
  cam->add_option("--iters", cam_iters, "Projection sweeps")->check(CLI::NonNegativeNumber)->capture_default_str();
  cam->add_option("--head-epochs", cam_epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  cam->add_option("--head-lr", cam_lr)->check(CLI::PositiveNumber)->capture_default_str();
  cam->add_option("--seed", cam_seed)->capture_default_str();
  cam->add_option("--csv", cam_csv, "Output map matrix")->required();
  cam->add_option("--json", cam_json, "Sidecar JSON {predicted_class, class_score}");
  cam->add_option("--pgm", cam_pgm, "Greyscale PGM render");
  cam->add_option("--head-out", cam_head_out, "Write the fitted head as JSON");

  // synth
  std::size_t sy_dims = 512, sy_per_class = 150;
  int sy_classes = 2;
  double sy_sep = 20.0;
  std::uint64_t sy_seed = 0;
  std::string sy_output;
  auto* synth = app.add_subcommand("synth", "Write a synthetic Gaussian-cluster feature file");
  synth->add_option("--dims", sy_dims)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--per-class", sy_per_class)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--classes", sy_classes)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--separation", sy_sep, "Centroid distance in noise std units")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth->add_option("--seed", sy_seed)->capture_default_str();
  synth->add_option("--output,-o", sy_output)->required();

  try {
    app.parse(argc, argv);
    if (*factorize) fit_flags.validate();
    if (*evaluate) {
      ev_fit.validate();
      if (ev_protocol == "resample" && (ev_train.empty() || ev_test.empty())) {
        throw CLI::ValidationError("--train/--test", "resample protocol needs both files");
      }
      if (ev_protocol == "episode" && ev_data.empty() && ev_train.empty()) {
        throw CLI::ValidationError("--data", "episode protocol needs --data");
      }
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "config error: " << e.get_name() << ": " << e.what() << "\n";
    return 2;
  }

  if (*factorize) {
    const nnsub_fit_params params = fit_flags.params();
    nnsub_model* raw = nullptr;
    json config = fit_flags.to_json();
    config["command"] = "factorize";
    if (!fz_features.empty()) {
      DatasetPtr data = load_dataset(fz_features);
      check(nnsub_fit_dataset(data.get(), &params, &raw));
      config["features"] = fz_features;
    } else {
      nnsub_matrix* x = nullptr;
      check(nnsub_matrix_load(fz_matrix.c_str(), &x));
      MatrixPtr xm(x);
      check(nnsub_fit(xm.get(), nullptr, 0, 0, &params, &raw));
      config["matrix"] = fz_matrix;
    }
    ModelPtr model(raw);
    char* text = nullptr;
    check(nnsub_model_to_json(model.get(), &text));
    json doc = json::parse(take(text));
    doc["config"] = config;
    emit(fz_output, doc.dump(1) + "\n");
    return 0;
  }

  if (*project) {
    ModelPtr model = load_model(pj_model);
    MatrixPtr x;
    if (!pj_features.empty()) {
      DatasetPtr data = load_dataset(pj_features);
      nnsub_matrix* f = nullptr;
      check(nnsub_dataset_features(data.get(), &f));
      x.reset(f);
    } else {
      nnsub_matrix* f = nullptr;
      check(nnsub_matrix_load(pj_matrix.c_str(), &f));
      x.reset(f);
    }
    nnsub_matrix* v = nullptr;
    check(nnsub_project(model.get(), x.get(), pj_iters, pj_tol, pj_seed, &v));
    MatrixPtr vm(v);
    check(nnsub_matrix_save(vm.get(), pj_output.c_str()));
    return 0;
  }

  if (*evaluate) {
    nnsub_eval_params params;
    nnsub_eval_params_init(&params);
    params.fit = ev_fit.params();
    params.knn_k = ev_K;
    params.repeats = ev_repeats;
    params.distance = ev_distance == "cosine" ? NNSUB_DISTANCE_COSINE : NNSUB_DISTANCE_EUCLIDEAN;
    params.classifier = ev_classifier == "linear" ? NNSUB_CLASSIFIER_LINEAR : NNSUB_CLASSIFIER_KNN;
    params.head_epochs = ev_head_epochs;
    params.head_lr = ev_head_lr;
    params.standardize = ev_standardize ? 1 : 0;
    params.resample = ev_no_resample ? 0 : 1;
    params.protocol = ev_protocol == "episode" ? NNSUB_PROTOCOL_EPISODE : NNSUB_PROTOCOL_RESAMPLE;
    params.ways = ev_ways;
    params.shots = ev_shots;
    params.query_per_class = ev_query;
    params.threads = ev_threads;

    DatasetPtr train = load_dataset(params.protocol == NNSUB_PROTOCOL_EPISODE && !ev_data.empty()
                                        ? ev_data
                                        : ev_train);
    DatasetPtr test;
    if (params.protocol == NNSUB_PROTOCOL_RESAMPLE) test = load_dataset(ev_test);
    if (ev_permute) {
      // Permute labels of train (and test) through a fresh dataset handle.
      auto permute = [&](DatasetPtr& d, std::uint64_t salt) {
        std::vector<int> labels = labels_of(d.get());
        std::mt19937_64 engine(params.fit.seed ^ salt);
        for (std::size_t i = labels.size(); i > 1; --i) {
          std::swap(labels[i - 1], labels[static_cast<std::size_t>(engine() % i)]);
        }
        nnsub_matrix* f = nullptr;
        check(nnsub_dataset_features(d.get(), &f));
        MatrixPtr fm(f);
        std::vector<double> values(nnsub_matrix_rows(f) * nnsub_matrix_cols(f));
        check(nnsub_matrix_read(f, values.data(), values.size()));
        nnsub_dataset* out = nullptr;
        check(nnsub_dataset_create(nnsub_matrix_rows(f), nnsub_matrix_cols(f), values.data(),
                                   labels.data(), nnsub_dataset_classes(d.get()), &out));
        d.reset(out);
      };
      permute(train, 0x7065726d);
      if (test) permute(test, 0x74657374);
    }

    char* report_json = nullptr;
    char* report_tsv = nullptr;
    check(nnsub_evaluate(train.get(), test.get(), &params, &report_json, &report_tsv));
    json doc = json::parse(take(report_json));
    const std::string tsv = take(report_tsv);
    json config = ev_fit.to_json();
    config.update({{"command", "evaluate"},
                   {"train", ev_train},
                   {"test", ev_test},
                   {"data", ev_data},
                   {"protocol", ev_protocol},
                   {"K", ev_K},
                   {"repeats", ev_repeats},
                   {"classifier", ev_classifier},
                   {"distance", ev_distance},
                   {"head_epochs", ev_head_epochs},
                   {"head_lr", ev_head_lr},
                   {"standardize", ev_standardize},
                   {"resample", !ev_no_resample},
                   {"permute_labels", ev_permute},
                   {"ways", ev_ways},
                   {"shots", ev_shots},
                   {"query", ev_query},
                   {"threads", ev_threads}});
    doc["config"] = config;
    if (ev_format == "json") {
      emit(ev_output, doc.dump(1) + "\n");
    } else {
      // same columns as the library row, plus the resolved config
      emit(ev_output, "method\tk\tclassifier\tK\truns\tseed\tmean\tstd\tconfig\n" + tsv + "\t" + config.dump() + "\n");
    }
    return 0;
  }

  if (*compare) {
    ModelPtr a = load_model(cp_a);
    ModelPtr b = load_model(cp_b);
    char* text = nullptr;
    check(nnsub_compare(a.get(), b.get(), cp_ridge, &text));
    json doc = json::parse(take(text));
    doc["config"] = {{"command", "compare"}, {"model_a", cp_a}, {"model_b", cp_b}, {"ridge", cp_ridge}};
    emit(cp_output, doc.dump(1) + "\n");
    return 0;
  }

  if (*cam) {
    ModelPtr model = load_model(cam_model);
    HeadPtr head;
    if (!cam_head.empty()) {
      nnsub_head* h = nullptr;
      check(nnsub_head_load(cam_head.c_str(), &h));
      head.reset(h);
    } else {
      DatasetPtr train = load_dataset(cam_train);
      const std::vector<int> labels = labels_of(train.get());
      nnsub_head* h = nullptr;
      check(nnsub_head_train(model.get(), labels.data(), labels.size(),
                             nnsub_dataset_classes(train.get()), cam_epochs, cam_lr, cam_seed, &h));
      head.reset(h);
    }
    if (!cam_head_out.empty()) {
      char* text = nullptr;
      check(nnsub_head_to_json(head.get(), &text));
      emit(cam_head_out, take(text) + "\n");
    }

    nnsub_fmap* f = nullptr;
    check(nnsub_fmap_load(cam_fmap.c_str(), &f));
    FmapPtr fmap(f);
    std::vector<double> feature;
    if (!cam_feature.empty()) {
      nnsub_matrix* fv = nullptr;
      check(nnsub_matrix_load(cam_feature.c_str(), &fv));
      MatrixPtr fvm(fv);
      feature.resize(nnsub_matrix_rows(fv) * nnsub_matrix_cols(fv));
      check(nnsub_matrix_read(fv, feature.data(), feature.size()));
    }
    nnsub_amap* m = nullptr;
    check(nnsub_cam_generate(fmap.get(), feature.empty() ? nullptr : feature.data(), feature.size(),
                             model.get(), head.get(), cam_h, cam_w, cam_iters, cam_seed, &m));
    AmapPtr amap(m);
    check(nnsub_amap_write(amap.get(), cam_csv.c_str(), nullptr,
                           cam_pgm.empty() ? nullptr : cam_pgm.c_str()));
    if (!cam_json.empty()) {
      char* text = nullptr;
      check(nnsub_amap_sidecar_json(amap.get(), &text));
      json doc = json::parse(take(text));
      doc["config"] = {{"command", "cam"},      {"model", cam_model},   {"head", cam_head},
                       {"train", cam_train},    {"fmap", cam_fmap},     {"feature", cam_feature},
                       {"out_h", cam_h},        {"out_w", cam_w},       {"iters", cam_iters},
                       {"head_epochs", cam_epochs}, {"head_lr", cam_lr}, {"seed", cam_seed}};
      emit(cam_json, doc.dump(1) + "\n");
    }
    return 0;
  }

  if (*synth) {
    nnsub_dataset* d = nullptr;
    check(nnsub_dataset_synthetic(sy_dims, sy_per_class, sy_classes, sy_sep, sy_seed, &d));
    DatasetPtr data(d);
    check(nnsub_dataset_save(data.get(), sy_output.c_str()));
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const LibraryError& e) {
    std::cerr << "error: " << nnsub_status_name(e.status) << ": " << e.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return 1;
  }
}
