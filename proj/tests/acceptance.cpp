// Acceptance run: one PASS/FAIL line per headline criterion, exit status 1 if
// any of them fails. The PneumoniaMNIST check needs external features and
// prints SKIP when they are not configured.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nnsub/analysis.hpp"
#include "nnsub/cam.hpp"
#include "nnsub/error.hpp"
#include "nnsub/factorize.hpp"
#include "nnsub/fewshot.hpp"
#include "nnsub/io.hpp"
#include "oracles/reference.hpp"
#include "oracles/sweep_check.hpp"

using namespace nnsub;

namespace {

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Tracks every NMF-family model fitted during the run.
struct CorpusCheck {
  int models = 0;
  int negative = 0;
  int unquantized = 0;

  void add(const FactorModel& m, std::span<const int> labels = {}) {
    if (!is_nmf_family(m.method)) return;
    ++models;
    if (m.U.minCoeff() < 0.0 || m.V.minCoeff() < 0.0 || (m.Z && m.Z->minCoeff() < 0.0)) ++negative;
    if (m.method == Method::SCNMFS) {
      for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j)
          if (labels[i] == labels[j] &&
              std::memcmp(m.V.row(static_cast<Index>(i)).eval().data(), m.V.row(static_cast<Index>(j)).eval().data(),
                          sizeof(double) * static_cast<std::size_t>(m.k)) != 0) {
            ++unquantized;
            return;
          }
    }
  }
  void add_projection(const Matrix& v) {
    ++models;
    if (v.minCoeff() < 0.0) ++negative;
  }
};

CorpusCheck corpus;

void oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst_f = 0.0, worst_obj = 0.0;
  bool nonneg = true;
  for (int i = 0; i < 200; ++i) {
    const oracle::SweepInstance in = oracle::random_instance(rng);
    for (const oracle::SweepDiff& d :
         {oracle::check_nmf(in, 10, rng), oracle::check_dnmf(in, 10, rng), oracle::check_scnmfs(in, 10, rng)}) {
      worst_f = std::max(worst_f, d.factors);
      worst_obj = std::max(worst_obj, d.objective);
      nonneg = nonneg && d.nonneg;
    }
  }
  const double t = seconds_since(t0);
  report("oracle_equivalence", worst_f < 1e-12 && worst_obj < 1e-12 && nonneg && t < 10.0,
         fmt("200 instances x 3 rules x 10 sweeps, max diff %.2e (factors) %.2e (objective), %.2f s", worst_f,
             worst_obj, t));
}

void nmf_monotonicity() {
  std::mt19937_64 rng(512300);
  const Matrix X = oracle::random_uniform(512, 300, rng);
  SolverOptions o;
  o.iters = 3000;
  o.seed = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const FactorModel m = nmf_fit(NonNegMatrix::checked(X), 30, o);
  const double t = seconds_since(t0);
  corpus.add(m);
  double worst = 0.0;
  for (std::size_t i = 1; i < m.objective_trace.size(); ++i) {
    const double prev = m.objective_trace[i - 1];
    worst = std::max(worst, (m.objective_trace[i] - prev) / std::abs(prev));
  }
  const bool ok = m.objective_trace.size() == 3001 && worst <= 1e-10 && t < 60.0;
  report("nmf_monotonicity", ok,
         fmt("512x300 k=30, %zu trace values, worst relative rise %.2e, %.2f s", m.objective_trace.size(), worst, t));
}

void dnmf_reduction() {
  std::mt19937_64 rng(77);
  int mismatched = 0;
  for (int t = 0; t < 20; ++t) {
    const Index m = 5 + static_cast<Index>(rng() % 40), n = 5 + static_cast<Index>(rng() % 40);
    const Matrix X = oracle::random_uniform(m, n, rng);
    std::vector<int> labels;
    for (Index j = 0; j < n; ++j) labels.push_back(static_cast<int>(j % 3));
    SolverOptions o;
    o.iters = 200;
    o.seed = rng();
    const int k = 1 + static_cast<int>(rng() % 4);
    const FactorModel a = nmf_fit(NonNegMatrix::checked(X), k, o);
    const FactorModel b = dnmf_fit(NonNegMatrix::checked(X), LabelMatrix(labels, 3), k, 0.0, o);
    corpus.add(a);
    corpus.add(b);
    const bool same = std::memcmp(a.U.data(), b.U.data(), sizeof(double) * static_cast<std::size_t>(a.U.size())) == 0 &&
                      std::memcmp(a.V.data(), b.V.data(), sizeof(double) * static_cast<std::size_t>(a.V.size())) == 0;
    mismatched += same ? 0 : 1;
  }
  report("dnmf_alpha0_reduction", mismatched == 0, fmt("20 seeded fits, %d not bitwise equal to nmf", mismatched));
}

void svd_correctness() {
  std::mt19937_64 rng(100);
  double worst_sigma = 0.0, worst_angle = 0.0, worst_full = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index m = 3 + static_cast<Index>(rng() % 38), n = 3 + static_cast<Index>(rng() % 38);
    const Matrix X = oracle::random_normal(m, n, rng);
    const int r = static_cast<int>(std::min(m, n));
    const int k = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(r));
    const FactorModel f = truncated_svd(X, k);
    const oracle::GramSvd g = oracle::gram_svd(X, k);
    for (int j = 0; j < k; ++j) worst_sigma = std::max(worst_sigma, std::abs((*f.sigma)(j) - g.sigma(j)) / g.sigma(j));
    worst_angle = std::max(worst_angle, oracle::max_principal_angle(g.U, f.U));
    worst_full = std::max(worst_full, reconstruction_error(X, truncated_svd(X, r)));
  }
  report("svd_correctness", worst_sigma < 1e-8 && worst_angle < 1e-6 && worst_full < 1e-10,
         fmt("100 matrices, sigma rel %.2e, angle %.2e rad, full-rank error %.2e", worst_sigma, worst_angle,
             worst_full));
}

void svd_isometry() {
  std::mt19937_64 rng(50);
  int differing = 0;
  for (int t = 0; t < 50; ++t) {
    const Index m = 2 + static_cast<Index>(rng() % 15);
    const Index n = m + 10 + static_cast<Index>(rng() % 40);
    const Matrix S = oracle::random_normal(m, n, rng);
    const Matrix Q = oracle::random_normal(m, 20, rng);
    std::vector<int> labels;
    for (Index i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng() % 3));
    const FactorModel f = truncated_svd(S, static_cast<int>(m));
    const std::vector<int> sub = knn_predict(f.V, labels, project_test(Q, f, SolverOptions{}), 5);
    differing += sub == oracle::brute_knn(S.transpose(), labels, Q.transpose(), 5) ? 0 : 1;
  }
  report("svd_isometry", differing == 0, fmt("50 datasets with k = M, %d prediction sets differ", differing));
}

void end_to_end() {
  // one draw so that train and test share the class centroids
  const FeatureDataset pool = make_gaussian_classes(512, 190, 2, 20.0, 31);
  std::vector<std::size_t> tr_idx, te_idx;
  for (std::size_t j = 0; j < 380; ++j) ((j % 190) < 150 ? tr_idx : te_idx).push_back(j);
  const FeatureDataset permuted = permute_labels(pool, 5);

  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (Method m : {Method::SVD, Method::NMF, Method::DNMF, Method::SCNMFS}) {
    EvalConfig c;
    c.method = m;
    c.k = 30;
    c.repeats = 10;
    c.seed = 7;
    const EvalReport real = evaluate(pool.subset(tr_idx), pool.subset(te_idx), c);
    const EvalReport ctrl = evaluate(permuted.subset(tr_idx), permuted.subset(te_idx), c);
    const bool chance = std::abs(ctrl.mean - 0.5) <= 3.0 * ctrl.std;
    ok = ok && real.mean > 0.99 && chance;
    detail += fmt("%s %.4f (control %.3f+-%.3f) ", std::string(method_name(m)).c_str(), real.mean, ctrl.mean,
                  ctrl.std);
  }
  const double t = seconds_since(t0);
  ok = ok && t < 300.0;
  report("synthetic_end_to_end", ok, detail + fmt("%.1f s", t));

  // fitted models on the same data feed the non-negativity corpus
  const FeatureDataset tr = pool.subset(tr_idx);
  const LabelMatrix Q(tr.labels, 2);
  Hyper h;
  h.iters = 300;
  for (Method m : {Method::NMF, Method::DNMF, Method::SCNMFS}) {
    const FactorModel f = fit(m, tr.features, &Q, 30, h, 3);
    corpus.add(f, tr.labels);
    SolverOptions o;
    o.iters = 300;
    corpus.add_projection(project_test(pool.subset(te_idx).features, f, o));
  }
}

void nonnegativity_corpus() {
  std::mt19937_64 rng(4242);
  for (int i = 0; i < 200; ++i) {
    const oracle::SweepInstance in = oracle::random_instance(rng);
    const LabelMatrix Q(in.labels, in.classes);
    Hyper h;
    h.iters = 50;
    h.alpha = in.alpha;
    h.beta = in.beta;
    for (Method m : {Method::NMF, Method::DNMF, Method::SCNMFS}) corpus.add(fit(m, in.X, &Q, in.k, h, rng()), in.labels);
  }
  report("nonneg_and_quantization", corpus.negative == 0 && corpus.unquantized == 0 && corpus.models > 600,
         fmt("%d models and projections, %d with negative entries, %d scnmfs models with unequal same-label rows",
             corpus.models, corpus.negative, corpus.unquantized));
}

void cam_reduction() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_fmap = [&](int c, int h, int w) {
    FeatureMapStack f;
    f.channels = c;
    f.height = h;
    f.width = w;
    for (int i = 0; i < c * h * w; ++i) f.data.push_back(u(rng));
    return f;
  };
  auto projection = [](const Matrix& U) {
    FactorModel m;
    m.method = Method::SVD;
    m.k = static_cast<int>(U.cols());
    m.U = U;
    m.V = Matrix::Zero(1, U.cols());
    return m;
  };

  bool exact = true;
  for (int c = 1; c <= 8; ++c) {
    const FeatureMapStack f = random_fmap(c, 5, 4);
    for (int j = 0; j < c; ++j) {
      Matrix W = Matrix::Zero(c, 2);
      W(j, 0) = 1.0;
      const ActivationMap a = cam_generate(f, f.pooled(), projection(Matrix::Identity(c, c)), W, 5, 4, SolverOptions{});
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 4; ++x) exact = exact && a.raw(y, x) == f.at(j, y, x);
    }
  }
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int c = 2 + static_cast<int>(rng() % 10), k = 1 + static_cast<int>(rng() % 4);
    const int h = 1 + static_cast<int>(rng() % 7), w = 1 + static_cast<int>(rng() % 7);
    const FeatureMapStack f = random_fmap(c, h, w);
    const Matrix U = oracle::random_normal(c, k, rng);
    const Matrix W = oracle::random_normal(k, 3, rng);
    const ActivationMap a = cam_generate(f, f.pooled(), projection(U), W, 16, 16, SolverOptions{});
    const Matrix ref = oracle::naive_cam(f.data, c, h, w, U * W.col(a.predicted_class));
    worst = std::max(worst, (a.raw - ref).cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
  report("cam_reduction", exact && worst < 1e-12,
         fmt("identity/one-hot exact: %s, naive loop max diff %.2e over 100 maps", exact ? "yes" : "no", worst));
}

void head_gradient() {
  std::mt19937_64 rng(9);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index n = 5 + static_cast<Index>(rng() % 30), k = 1 + static_cast<Index>(rng() % 8);
    const int classes = 2 + static_cast<int>(rng() % 4);
    const Matrix F = oracle::random_normal(n, k, rng);
    std::vector<int> labels;
    for (Index i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(classes)));
    const Matrix W = oracle::random_normal(k, classes, rng);
    Matrix g;
    softmax_cross_entropy(F, labels, W, &g);
    const Matrix fd = oracle::central_difference(
        [&](const Matrix& w) { return softmax_cross_entropy(F, labels, w, nullptr); }, W, 1e-5);
    worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / std::max(1e-12, fd.cwiseAbs().maxCoeff()));
  }
  report("head_gradient", worst < 1e-5, fmt("20 problems, max relative error %.2e", worst));
}

void cca_sanity() {
  std::mt19937_64 rng(10);
  double identical = 0.0, invariance = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index d1 = 1 + static_cast<Index>(rng() % 6), d2 = 1 + static_cast<Index>(rng() % 6);
    const Index n = 30 + static_cast<Index>(rng() % 100);
    const Matrix X1 = oracle::random_normal(d1, n, rng);
    const Matrix X2 = oracle::random_normal(d2, n, rng);
    for (double c : cca_similarity(X1, X1, 0.0).correlations) identical = std::max(identical, std::abs(c - 1.0));
    const Matrix R1 = oracle::random_normal(d1, d1, rng) + 3.0 * Matrix::Identity(d1, d1);
    const Matrix R2 = oracle::random_normal(d2, d2, rng) + 3.0 * Matrix::Identity(d2, d2);
    const CcaResult base = cca_similarity(X1, X2, 0.0);
    const CcaResult moved = cca_similarity(R1 * X1, R2 * X2, 0.0);
    for (std::size_t i = 0; i < base.correlations.size(); ++i)
      invariance = std::max(invariance, std::abs(base.correlations[i] - moved.correlations[i]));
  }
  report("cca_sanity", identical < 1e-8 && invariance < 1e-8,
         fmt("identical |rho - 1| %.2e, transform invariance %.2e", identical, invariance));
}

// Target means (percent) on PneumoniaMNIST features at train size 300, k = 30.
void pneumonia_conditional() {
  const char* train_path = std::getenv("NNSUB_PNEUMONIA_TRAIN");
  const char* test_path = std::getenv("NNSUB_PNEUMONIA_TEST");
  if (!train_path || !test_path) {
    std::printf("SKIP  %-28s set NNSUB_PNEUMONIA_TRAIN and NNSUB_PNEUMONIA_TEST to feature files\n",
                "pneumonia_ordering");
    return;
  }
  const FeatureDataset train = io::load_features(train_path);
  const FeatureDataset test = io::load_features(test_path);
  const struct {
    Method method;
    double target;
  } rows[] = {{Method::SCNMFS, 80.75}, {Method::SVD, 72.75}, {Method::NMF, 63.25}};
  double got[3];
  bool within = true;
  std::string detail;
  for (int i = 0; i < 3; ++i) {
    EvalConfig c;
    c.method = rows[i].method;
    c.k = 30;
    c.knn_k = 5;
    c.repeats = 10;
    got[i] = 100.0 * evaluate(train, test, c).mean;
    within = within && std::abs(got[i] - rows[i].target) <= 5.0;
    detail += fmt("%s %.2f (target %.2f) ", std::string(method_name(rows[i].method)).c_str(), got[i],
                  rows[i].target);
  }
  report("pneumonia_ordering", within && got[0] > got[1] && got[1] > got[2], detail);
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void()>> steps[] = {
      {"oracle_equivalence", oracle_equivalence},
      {"nmf_monotonicity", nmf_monotonicity},
      {"svd_correctness", svd_correctness},
      {"svd_isometry", svd_isometry},
      {"dnmf_alpha0_reduction", dnmf_reduction},
      {"synthetic_end_to_end", end_to_end},
      {"nonneg_and_quantization", nonnegativity_corpus},
      {"cam_reduction", cam_reduction},
      {"head_gradient", head_gradient},
      {"cca_sanity", cca_sanity},
      {"pneumonia_ordering", pneumonia_conditional},
  };
  for (const auto& [name, step] : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      report(name, false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
