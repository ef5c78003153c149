#include "nnsub/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "nnsub/error.hpp"

namespace nnsub {
namespace {

// Symmetric PSD inverse square root; eigenvalues at or below 1e-12 * max are
// treated as a null space.
Matrix inverse_sqrt_psd(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success) throw NumericError("covariance eigensolve failed");
  const Vector& lambda = eig.eigenvalues();
  const double cutoff = 1e-12 * std::max(lambda.maxCoeff(), 0.0);
  Vector inv = Vector::Zero(lambda.size());
  for (Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > cutoff) inv(i) = 1.0 / std::sqrt(lambda(i));
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix centered(const Matrix& x) {
  const Vector mean = x.rowwise().mean();
  return x.colwise() - mean;
}

}  // namespace

CcaResult cca_similarity(const Matrix& X1, const Matrix& X2, std::optional<double> ridge) {
  if (X1.cols() != X2.cols()) {
    throw DimensionError("sample counts differ: " + std::to_string(X1.cols()) + " vs " +
                         std::to_string(X2.cols()));
  }
  if (X1.cols() < 2) throw DimensionError("CCA needs at least two samples");
  if (X1.rows() < 1 || X2.rows() < 1) throw DimensionError("empty variable set");
  if (ridge && !(*ridge >= 0.0)) throw ConfigError("ridge must be >= 0");

  const double denom = static_cast<double>(X1.cols() - 1);
  const Matrix c1 = centered(X1);
  const Matrix c2 = centered(X2);
  Matrix s11 = c1 * c1.transpose() / denom;
  Matrix s22 = c2 * c2.transpose() / denom;
  const Matrix s12 = c1 * c2.transpose() / denom;
  if (!s11.allFinite() || !s22.allFinite() || !s12.allFinite()) {
    throw NumericError("covariance matrices are not finite");
  }

  const double r1 = ridge ? *ridge : 1e-8 * s11.trace() / static_cast<double>(s11.rows());
  const double r2 = ridge ? *ridge : 1e-8 * s22.trace() / static_cast<double>(s22.rows());
  s11.diagonal().array() += r1;
  s22.diagonal().array() += r2;

  const Matrix k = inverse_sqrt_psd(s11) * s12 * inverse_sqrt_psd(s22);
  Eigen::JacobiSVD<Matrix> svd(k);
  const Vector& rho = svd.singularValues();

  const Index count = std::min({X1.rows(), X2.rows(), X1.cols() - 1, rho.size()});
  CcaResult result;
  result.correlations.assign(rho.data(), rho.data() + count);
  double sum = 0.0;
  for (double r : result.correlations) sum += r;
  result.mean_correlation = count ? sum / static_cast<double>(count) : 0.0;
  return result;
}

double hoyer_sparsity(const Matrix& m) {
  if (m.size() == 0) throw DimensionError("empty matrix");
  require_finite(m, "matrix");
  const double l2 = m.norm();
  if (l2 == 0.0) throw NumericError("Hoyer sparsity undefined for an all-zero matrix");
  const double n = static_cast<double>(m.size());
  if (m.size() == 1) return 1.0;
  const double l1 = m.cwiseAbs().sum();
  const double root_n = std::sqrt(n);
  const double h = (root_n - l1 / l2) / (root_n - 1.0);
  return std::clamp(h, 0.0, 1.0);
}

std::string_view matrix_tag_name(MatrixTag tag) noexcept {
  return tag == MatrixTag::UTrain ? "U_train" : "V_train";
}

SparsityReport sparsity_report(const Matrix& m, MatrixTag tag) {
  SparsityReport report;
  report.tag = tag;
  report.hoyer = hoyer_sparsity(m);
  const double tau = 1e-6 * m.cwiseAbs().maxCoeff();
  const auto zeros = (m.array().abs() <= tau).count();
  report.zero_fraction = static_cast<double>(zeros) / static_cast<double>(m.size());
  return report;
}

double reconstruction_error(const Matrix& X, const FactorModel& model) {
  if (X.rows() != model.U.rows() || X.cols() != model.V.rows() ||
      model.U.cols() != model.V.cols()) {
    throw DimensionError("matrix is " + std::to_string(X.rows()) + "x" +
                         std::to_string(X.cols()) + " but model reconstructs " +
                         std::to_string(model.U.rows()) + "x" + std::to_string(model.V.rows()));
  }
  const double norm = X.norm();
  if (norm == 0.0) throw NumericError("relative error undefined for a zero matrix");
  return (X - model.U * model.V.transpose()).norm() / norm;
}

double column_similarity(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows()) throw DimensionError("column_similarity: row counts differ");
  if (A.cols() < 1 || B.cols() < 1) throw DimensionError("column_similarity: no columns");
  const Vector na = A.colwise().norm().transpose();
  const Vector nb = B.colwise().norm().transpose();
  const Matrix dots = A.transpose() * B;
  double total = 0.0;
  for (Index i = 0; i < A.cols(); ++i) {
    double best = 0.0;
    for (Index j = 0; j < B.cols(); ++j) {
      const double scale = na(i) * nb(j);
      if (scale > 0.0) best = std::max(best, std::abs(dots(i, j)) / scale);
    }
    total += best;
  }
  return total / static_cast<double>(A.cols());
}

}  // namespace nnsub
