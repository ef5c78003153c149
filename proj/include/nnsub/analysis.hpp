#ifndef NNSUB_ANALYSIS_HPP
#define NNSUB_ANALYSIS_HPP

#include <optional>
#include <string_view>
#include <vector>

#include "nnsub/factorize.hpp"
#include "nnsub/types.hpp"

namespace nnsub {

struct CcaResult {
  std::vector<double> correlations;  // descending
  double mean_correlation = 0.0;
};

/// Canonical correlations between the variable sets X1 (M1 x N) and
/// X2 (M2 x N), columns being paired samples. Covariances are estimated with
/// the sample mean removed and ridge * I added to both auto-covariances.
/// With no ridge given, each side uses 1e-8 * trace(S_ii) / M_i.
/// Returns min(M1, M2, N - 1) correlations.
CcaResult cca_similarity(const Matrix& X1, const Matrix& X2,
                         std::optional<double> ridge = std::nullopt);

/// (sqrt(n) - |m|_1 / |m|_2) / (sqrt(n) - 1) over all n entries.
/// A single-entry matrix scores 1.
double hoyer_sparsity(const Matrix& m);

enum class MatrixTag { UTrain, VTrain };
std::string_view matrix_tag_name(MatrixTag tag) noexcept;

struct SparsityReport {
  double hoyer = 0.0;
  double zero_fraction = 0.0;  // share of entries with |x| <= 1e-6 * max|x|
  MatrixTag tag = MatrixTag::UTrain;
};

SparsityReport sparsity_report(const Matrix& m, MatrixTag tag);

/// ||X - U V^T||_F / ||X||_F.
double reconstruction_error(const Matrix& X, const FactorModel& model);

/// Mean over columns of A of the largest |cosine| against any column of B.
/// Both must have the same number of rows.
double column_similarity(const Matrix& A, const Matrix& B);

}  // namespace nnsub

#endif  // NNSUB_ANALYSIS_HPP
