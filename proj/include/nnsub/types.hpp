#ifndef NNSUB_TYPES_HPP
#define NNSUB_TYPES_HPP

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nnsub {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Throws NumericError if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

/// Dense matrix whose entries have been validated as finite and >= 0.
class NonNegMatrix {
 public:
  /// Validates and takes ownership; throws NonNegativityError / NumericError.
  static NonNegMatrix checked(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }

 private:
  explicit NonNegMatrix(Matrix values) : values_(std::move(values)) {}
  Matrix values_;
};

/// One-hot C x N class indicator built from integer labels.
class LabelMatrix {
 public:
  /// Throws LabelError if classes < 1, labels is empty, or a label is
  /// outside [0, classes).
  LabelMatrix(std::span<const int> labels, int classes);

  const Matrix& indicator() const noexcept { return indicator_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  int classes() const noexcept { return static_cast<int>(indicator_.rows()); }
  Index samples() const noexcept { return indicator_.cols(); }

 private:
  std::vector<int> labels_;
  Matrix indicator_;
};

// Seeding and sampling helpers. Only std::mt19937_64 raw output is used so
// that streams are reproducible across standard library implementations.
using Engine = std::mt19937_64;

/// Mixes a base seed with a stream index (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Uniform double on (0, 1].
double uniform_open_closed(Engine& engine) noexcept;

/// Uniform double on [0, 1).
double uniform_closed_open(Engine& engine) noexcept;

/// Standard normal via Box-Muller on the two uniforms above.
double standard_normal(Engine& engine) noexcept;

/// rows x cols matrix of i.i.d. uniform (0, 1] entries, filled column-major.
Matrix uniform_positive(Index rows, Index cols, Engine& engine);

/// Fisher-Yates shuffle driven by raw engine output.
void shuffle_indices(std::vector<std::size_t>& indices, Engine& engine);

}  // namespace nnsub

#endif  // NNSUB_TYPES_HPP
