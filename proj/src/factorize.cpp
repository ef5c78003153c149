#include "nnsub/factorize.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "nnsub/error.hpp"

namespace nnsub {

std::string_view method_name(Method method) noexcept {
  switch (method) {
    case Method::SVD: return "svd";
    case Method::NMF: return "nmf";
    case Method::DNMF: return "dnmf";
    case Method::SCNMFS: return "scnmfs";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Method m : {Method::SVD, Method::NMF, Method::DNMF, Method::SCNMFS}) {
    if (lower == method_name(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

namespace updates {
namespace {

// F <- F .* num ./ (den + eps). Every solver funnels through here so that
// identical numerators and denominators give identical bits.
void multiplicative_update(Matrix& factor, const Matrix& num, const Matrix& den,
                           double eps) {
  factor.array() *= num.array() / (den.array() + eps);
}

inline void assert_nonneg([[maybe_unused]] const Matrix& m) {
  assert(m.size() == 0 || m.minCoeff() >= 0.0);
}

}  // namespace

double nmf_objective(double x_norm2, const Matrix& XtU, const Matrix& UtU,
                     const Matrix& V) {
  const Matrix VtV = V.transpose() * V;
  const double cross = (XtU.array() * V.array()).sum();
  const double model = (UtU.array() * VtV.array()).sum();
  return std::max(0.0, x_norm2 - 2.0 * cross + model);
}

double nmf_sweep(const Matrix& X, Matrix& U, Matrix& V, double eps) {
  {
    const Matrix XV = X * V;
    const Matrix VtV = V.transpose() * V;
    const Matrix den = U * VtV;
    multiplicative_update(U, XV, den, eps);
  }
  const Matrix XtU = X.transpose() * U;
  const Matrix UtU = U.transpose() * U;
  const Matrix den = V * UtU;
  multiplicative_update(V, XtU, den, eps);
  assert_nonneg(U);
  assert_nonneg(V);
  return nmf_objective(X.squaredNorm(), XtU, UtU, V);
}

Matrix positive_part(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix negative_part(const Matrix& m) { return (-m).cwiseMax(0.0); }

// V (V^T V)^+ equals (V^+)^T, so the SVD of V itself is enough. Working on V
// instead of the Gram matrix keeps the rounding error linear in cond(V).
Matrix dnmf_aux(const Matrix& Q, const Matrix& V) {
  Eigen::JacobiSVD<Matrix> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  // same as dropping Gram eigenvalues below 1e-12 * max
  const double cutoff = s.size() ? 1e-6 * s.maxCoeff() : 0.0;
  Vector inv = Vector::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  }
  return (Q * svd.matrixU()) * inv.asDiagonal() * svd.matrixV().transpose();
}

double dnmf_objective(const Matrix& X, const Matrix& Q, const Matrix& U,
                      const Matrix& V, const Matrix& A, double alpha) {
  const Matrix XtU = X.transpose() * U;
  const Matrix UtU = U.transpose() * U;
  const double recon = nmf_objective(X.squaredNorm(), XtU, UtU, V);
  return recon + alpha * (Q - A * V.transpose()).squaredNorm();
}

double dnmf_sweep(const Matrix& X, const Matrix& Q, Matrix& U, Matrix& V,
                  Matrix& A, double alpha, double eps) {
  {
    const Matrix XV = X * V;
    const Matrix VtV = V.transpose() * V;
    const Matrix den = U * VtV;
    multiplicative_update(U, XV, den, eps);
  }
  const Matrix XtU = X.transpose() * U;
  const Matrix UtU = U.transpose() * U;
  {
    const Matrix VAtA = V * (A.transpose() * A);
    const Matrix QtA = Q.transpose() * A;
    Matrix num = XtU;
    num += alpha * negative_part(VAtA);
    num += alpha * positive_part(QtA);
    Matrix den = V * UtU;
    den += alpha * positive_part(VAtA);
    den += alpha * negative_part(QtA);
    multiplicative_update(V, num, den, eps);
  }
  A = dnmf_aux(Q, V);
  assert_nonneg(U);
  assert_nonneg(V);
  const double recon = nmf_objective(X.squaredNorm(), XtU, UtU, V);
  return recon + alpha * (Q - A * V.transpose()).squaredNorm();
}

double scnmfs_objective(const Matrix& X, const Matrix& Q, const Matrix& U,
                        const Matrix& Z, double beta) {
  const Matrix XQt = X * Q.transpose();
  const Matrix QQt = Q * Q.transpose();
  const Matrix QXtU = XQt.transpose() * U;
  const Matrix UtU = U.transpose() * U;
  const Matrix ZtQQtZ = Z.transpose() * (QQt * Z);
  const double cross = (QXtU.array() * Z.array()).sum();
  const double model = (UtU.array() * ZtQQtZ.array()).sum();
  const double recon = std::max(0.0, X.squaredNorm() - 2.0 * cross + model);
  return recon + beta * U.squaredNorm();
}

double scnmfs_sweep(const Matrix& X, const Matrix& Q, Matrix& U, Matrix& Z,
                    double beta, double eps) {
  const Matrix XQt = X * Q.transpose();
  const Matrix QQt = Q * Q.transpose();
  {
    const Matrix num = XQt * Z;
    const Matrix ZtQQtZ = Z.transpose() * (QQt * Z);
    Matrix den = U * ZtQQtZ;
    den += beta * U;
    multiplicative_update(U, num, den, eps);
  }
  const Matrix QXtU = XQt.transpose() * U;
  const Matrix UtU = U.transpose() * U;
  const Matrix den = (QQt * Z) * UtU;
  multiplicative_update(Z, QXtU, den, eps);
  assert_nonneg(U);
  assert_nonneg(Z);

  const Matrix ZtQQtZ = Z.transpose() * (QQt * Z);
  const double cross = (QXtU.array() * Z.array()).sum();
  const double model = (UtU.array() * ZtQQtZ.array()).sum();
  const double recon = std::max(0.0, X.squaredNorm() - 2.0 * cross + model);
  return recon + beta * U.squaredNorm();
}

double projection_sweep(const Matrix& XtU, const Matrix& UtU, double x_norm2,
                        Matrix& V, double eps) {
  const Matrix den = V * UtU;
  multiplicative_update(V, XtU, den, eps);
  assert_nonneg(V);
  return nmf_objective(x_norm2, XtU, UtU, V);
}

}  // namespace updates

namespace {

void check_nmf_rank(const NonNegMatrix& X, int k) {
  const Index limit = std::min(X.rows(), X.cols());
  if (k < 1 || k >= limit) {
    throw DimensionError("k = " + std::to_string(k) + " must satisfy 1 <= k < min(M, N) = " +
                         std::to_string(limit));
  }
  if (X.values().squaredNorm() == 0.0) {
    throw NumericError("input matrix is entirely zero; multiplicative updates are undefined");
  }
}

void check_solver(const SolverOptions& options) {
  if (options.iters < 0) throw ConfigError("iters must be >= 0");
  if (!(options.tol >= 0.0)) throw ConfigError("tol must be >= 0");
  if (!(options.eps > 0.0)) throw ConfigError("eps must be > 0");
}

void check_labels(const NonNegMatrix& X, const LabelMatrix& Q) {
  if (Q.samples() != X.cols()) {
    throw LabelMismatchError("label count " + std::to_string(Q.samples()) +
                             " does not match sample count " + std::to_string(X.cols()));
  }
}

bool converged(double previous, double current, double tol) {
  if (tol <= 0.0) return false;
  const double scale = std::max(std::abs(previous), 1e-300);
  return std::abs(previous - current) / scale < tol;
}

Hyper hyper_from(const SolverOptions& options) {
  Hyper h;
  h.iters = options.iters;
  h.tol = options.tol;
  h.eps = options.eps;
  return h;
}

}  // namespace

FactorModel truncated_svd(const Matrix& X, int k) {
  if (X.rows() < 1 || X.cols() < 1) throw DimensionError("empty input matrix");
  require_finite(X, "input matrix");
  const Index limit = std::min(X.rows(), X.cols());
  if (k < 1 || k > limit) {
    throw DimensionError("k = " + std::to_string(k) + " must satisfy 1 <= k <= min(M, N) = " +
                         std::to_string(limit));
  }

  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU);
  FactorModel model;
  model.method = Method::SVD;
  model.k = k;
  model.U = svd.matrixU().leftCols(k);
  for (Index j = 0; j < k; ++j) {
    Index arg = 0;
    model.U.col(j).cwiseAbs().maxCoeff(&arg);
    if (model.U(arg, j) < 0.0) model.U.col(j) *= -1.0;
  }
  model.sigma = svd.singularValues().head(k);
  model.V = X.transpose() * model.U;
  model.hyper.iters = 0;
  return model;
}

FactorModel nmf_fit(const NonNegMatrix& X, int k, const SolverOptions& options) {
  check_nmf_rank(X, k);
  check_solver(options);
  const Matrix& x = X.values();

  Engine engine(options.seed);
  Matrix U = uniform_positive(x.rows(), k, engine);
  Matrix V = uniform_positive(x.cols(), k, engine);

  FactorModel model;
  model.method = Method::NMF;
  model.k = k;
  model.seed = options.seed;
  model.hyper = hyper_from(options);
  model.objective_trace.reserve(static_cast<std::size_t>(options.iters) + 1);
  model.objective_trace.push_back(updates::nmf_objective(
      x.squaredNorm(), x.transpose() * U, U.transpose() * U, V));

  for (int it = 0; it < options.iters; ++it) {
    const double f = updates::nmf_sweep(x, U, V, options.eps);
    const double previous = model.objective_trace.back();
    model.objective_trace.push_back(f);
    if (converged(previous, f, options.tol)) break;
  }
  model.U = std::move(U);
  model.V = std::move(V);
  return model;
}

FactorModel dnmf_fit(const NonNegMatrix& X, const LabelMatrix& Q, int k,
                     double alpha, const SolverOptions& options) {
  check_nmf_rank(X, k);
  check_solver(options);
  check_labels(X, Q);
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
  const Matrix& x = X.values();
  const Matrix& q = Q.indicator();

  Engine engine(options.seed);
  Matrix U = uniform_positive(x.rows(), k, engine);
  Matrix V = uniform_positive(x.cols(), k, engine);
  Matrix A = updates::dnmf_aux(q, V);

  FactorModel model;
  model.method = Method::DNMF;
  model.k = k;
  model.seed = options.seed;
  model.hyper = hyper_from(options);
  model.hyper.alpha = alpha;
  model.objective_trace.reserve(static_cast<std::size_t>(options.iters) + 1);
  model.objective_trace.push_back(updates::dnmf_objective(x, q, U, V, A, alpha));

  for (int it = 0; it < options.iters; ++it) {
    const double f = updates::dnmf_sweep(x, q, U, V, A, alpha, options.eps);
    const double previous = model.objective_trace.back();
    model.objective_trace.push_back(f);
    if (converged(previous, f, options.tol)) break;
  }
  model.U = std::move(U);
  model.V = std::move(V);
  model.A = std::move(A);
  return model;
}

FactorModel scnmfs_fit(const NonNegMatrix& X, const LabelMatrix& Q, int k,
                       double beta, const SolverOptions& options) {
  check_nmf_rank(X, k);
  check_solver(options);
  check_labels(X, Q);
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  const Matrix& x = X.values();
  const Matrix& q = Q.indicator();

  Engine engine(options.seed);
  Matrix U = uniform_positive(x.rows(), k, engine);
  Matrix Z = uniform_positive(q.rows(), k, engine);

  FactorModel model;
  model.method = Method::SCNMFS;
  model.k = k;
  model.seed = options.seed;
  model.hyper = hyper_from(options);
  model.hyper.beta = beta;
  model.objective_trace.reserve(static_cast<std::size_t>(options.iters) + 1);
  model.objective_trace.push_back(updates::scnmfs_objective(x, q, U, Z, beta));

  for (int it = 0; it < options.iters; ++it) {
    const double f = updates::scnmfs_sweep(x, q, U, Z, beta, options.eps);
    const double previous = model.objective_trace.back();
    model.objective_trace.push_back(f);
    if (converged(previous, f, options.tol)) break;
  }
  model.V = q.transpose() * Z;
  model.U = std::move(U);
  model.Z = std::move(Z);
  return model;
}

FactorModel fit(Method method, const Matrix& X, const LabelMatrix* labels,
                int k, const Hyper& hyper, std::uint64_t seed) {
  if (method == Method::SVD) return truncated_svd(X, k);

  const SolverOptions options{hyper.iters, hyper.tol, hyper.eps, seed};
  NonNegMatrix x = NonNegMatrix::checked(X);
  if (method == Method::NMF) return nmf_fit(x, k, options);
  if (labels == nullptr) {
    throw ConfigError(std::string(method_name(method)) + " requires training labels");
  }
  if (method == Method::DNMF) return dnmf_fit(x, *labels, k, hyper.alpha, options);
  return scnmfs_fit(x, *labels, k, hyper.beta, options);
}

Matrix project_test(const Matrix& X_test, const FactorModel& model,
                    const SolverOptions& options) {
  if (X_test.rows() != model.U.rows()) {
    throw DimensionError("test features have " + std::to_string(X_test.rows()) +
                         " rows, model expects " + std::to_string(model.U.rows()));
  }
  if (X_test.cols() < 1) throw DimensionError("no test samples");
  require_finite(X_test, "test matrix");
  if (model.method == Method::SVD) return X_test.transpose() * model.U;

  const NonNegMatrix x = NonNegMatrix::checked(X_test);
  check_solver(options);
  Engine engine(options.seed);
  Matrix V = uniform_positive(X_test.cols(), model.U.cols(), engine);
  const Matrix XtU = x.values().transpose() * model.U;
  const Matrix UtU = model.U.transpose() * model.U;
  const double x_norm2 = x.values().squaredNorm();

  double previous = updates::nmf_objective(x_norm2, XtU, UtU, V);
  for (int it = 0; it < options.iters; ++it) {
    const double f = updates::projection_sweep(XtU, UtU, x_norm2, V, options.eps);
    if (converged(previous, f, options.tol)) break;
    previous = f;
  }
  return V;
}

}  // namespace nnsub
