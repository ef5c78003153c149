#ifndef NNSUB_FACTORIZE_HPP
#define NNSUB_FACTORIZE_HPP

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "nnsub/types.hpp"

namespace nnsub {

enum class Method { SVD, NMF, DNMF, SCNMFS };

std::string_view method_name(Method method) noexcept;
/// Case-insensitive; throws ConfigError on unknown names.
Method parse_method(std::string_view name);
inline bool is_nmf_family(Method m) noexcept { return m != Method::SVD; }

/// Iteration control shared by every multiplicative-update solver.
struct SolverOptions {
  int iters = 3000;
  /// Early stop when |f_prev - f| / max(|f_prev|, tiny) < tol. 0 disables it.
  double tol = 0.0;
  /// Added to every multiplicative-update denominator.
  double eps = 1e-12;
  std::uint64_t seed = 0;
};

struct Hyper {
  double alpha = 1.0;  // DNMF label-regression weight
  double beta = 0.1;   // SCNMFS Frobenius penalty on U, in (0, 1)
  int iters = 3000;
  double tol = 0.0;
  double eps = 1e-12;
};

/// A fitted subspace. U is M x k (projection), V is N x k (one row per
/// training sample). objective_trace[0] is the objective at initialisation
/// and objective_trace[t] the value after sweep t; SVD models carry an empty
/// trace.
struct FactorModel {
  Method method = Method::NMF;
  int k = 0;
  Matrix U;
  Matrix V;
  std::optional<Matrix> A;      // DNMF, C x k, signed
  std::optional<Matrix> Z;      // SCNMFS, C x k, V = Q^T Z
  std::optional<Vector> sigma;  // SVD singular values, descending
  std::vector<double> objective_trace;
  std::uint64_t seed = 0;
  Hyper hyper;
};

/// Top-k left singular vectors of X (columns sign-fixed so that the
/// largest-magnitude entry is positive) and V = X^T U.
FactorModel truncated_svd(const Matrix& X, int k);

FactorModel nmf_fit(const NonNegMatrix& X, int k, const SolverOptions& options);

/// alpha = 0 is accepted and reproduces nmf_fit bit for bit.
FactorModel dnmf_fit(const NonNegMatrix& X, const LabelMatrix& Q, int k,
                     double alpha, const SolverOptions& options);

FactorModel scnmfs_fit(const NonNegMatrix& X, const LabelMatrix& Q, int k,
                       double beta, const SolverOptions& options);

/// Dispatches on method. labels may be null for SVD and NMF.
FactorModel fit(Method method, const Matrix& X, const LabelMatrix* labels,
                int k, const Hyper& hyper, std::uint64_t seed);

/// Subspace coordinates (N_t x k) of test columns with U frozen. SVD models
/// return X_test^T U; the NMF family iterates only the plain NMF V-update
/// from a seeded uniform start.
Matrix project_test(const Matrix& X_test, const FactorModel& model,
                    const SolverOptions& options);

/// Single sweeps of each update rule, exposed so the solvers can be checked
/// step by step. Each returns the objective after the sweep.
namespace updates {

/// ||X - U V^T||_F^2 evaluated through Gram matrices:
/// ||X||^2 - 2 <X^T U, V> + <U^T U, V^T V>, clamped at 0.
double nmf_objective(double x_norm2, const Matrix& XtU, const Matrix& UtU,
                     const Matrix& V);

double nmf_sweep(const Matrix& X, Matrix& U, Matrix& V, double eps);

/// Elementwise positive part: negative entries set to zero.
Matrix positive_part(const Matrix& m);
/// Magnitude of the negative part: positive entries set to zero, the rest
/// negated so the result is non-negative. m = positive_part(m) - negative_part(m).
Matrix negative_part(const Matrix& m);

/// A = Q V (V^T V)^+. Directions of V with singular value below 1e-6 of
/// the largest are dropped.
Matrix dnmf_aux(const Matrix& Q, const Matrix& V);

double dnmf_objective(const Matrix& X, const Matrix& Q, const Matrix& U,
                      const Matrix& V, const Matrix& A, double alpha);

/// U-update, V-update (with the current A), then A recomputed from V.
double dnmf_sweep(const Matrix& X, const Matrix& Q, Matrix& U, Matrix& V,
                  Matrix& A, double alpha, double eps);

double scnmfs_objective(const Matrix& X, const Matrix& Q, const Matrix& U,
                        const Matrix& Z, double beta);

/// U-update then Z-update.
double scnmfs_sweep(const Matrix& X, const Matrix& Q, Matrix& U, Matrix& Z,
                    double beta, double eps);

/// Frozen-U V-update used at test time. XtU = X^T U and UtU = U^T U are
/// constant across sweeps. Returns ||X - U V^T||^2.
double projection_sweep(const Matrix& XtU, const Matrix& UtU, double x_norm2,
                        Matrix& V, double eps);

}  // namespace updates

}  // namespace nnsub

#endif  // NNSUB_FACTORIZE_HPP
