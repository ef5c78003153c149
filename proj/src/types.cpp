#include "nnsub/types.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nnsub/error.hpp"

namespace nnsub {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + " contains NaN or Inf");
  }
}

NonNegMatrix NonNegMatrix::checked(Matrix values) {
  if (values.rows() < 1 || values.cols() < 1) {
    throw DimensionError("matrix must have at least one row and one column");
  }
  require_finite(values, "matrix");
  if (values.minCoeff() < 0.0) {
    Index r = 0, c = 0;
    const double v = values.minCoeff(&r, &c);
    throw NonNegativityError("negative entry " + std::to_string(v) + " at (" +
                             std::to_string(r) + ", " + std::to_string(c) + ")");
  }
  return NonNegMatrix(std::move(values));
}

LabelMatrix::LabelMatrix(std::span<const int> labels, int classes)
    : labels_(labels.begin(), labels.end()) {
  if (classes < 1) throw LabelError("number of classes must be >= 1");
  if (labels.empty()) throw LabelError("label vector is empty");
  indicator_ = Matrix::Zero(classes, static_cast<Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const int label = labels[j];
    if (label < 0 || label >= classes) {
      throw LabelError("label " + std::to_string(label) + " of sample " +
                       std::to_string(j) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    indicator_(label, static_cast<Index>(j)) = 1.0;
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

double uniform_open_closed(Engine& engine) noexcept {
  return static_cast<double>((engine() >> 11) + 1) * 0x1.0p-53;
}

double uniform_closed_open(Engine& engine) noexcept {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

double standard_normal(Engine& engine) noexcept {
  const double u1 = uniform_open_closed(engine);
  const double u2 = uniform_closed_open(engine);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix uniform_positive(Index rows, Index cols, Engine& engine) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = uniform_open_closed(engine);
  return m;
}

void shuffle_indices(std::vector<std::size_t>& indices, Engine& engine) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t bound = i;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t r;
    do {
      r = engine();
    } while (r >= limit);
    std::swap(indices[i - 1], indices[static_cast<std::size_t>(r % bound)]);
  }
}

}  // namespace nnsub
