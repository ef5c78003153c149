#include "nnsub/cam.hpp"

#include <cmath>
#include <string>

#include "nnsub/error.hpp"

namespace nnsub {

void FeatureMapStack::validate() const {
  if (channels < 1 || height < 1 || width < 1) {
    throw DimensionError("feature map dimensions must be positive");
  }
  const auto expected = static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
                        static_cast<std::size_t>(width);
  if (data.size() != expected) {
    throw DimensionError("feature map holds " + std::to_string(data.size()) +
                         " values, expected " + std::to_string(expected));
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericError("feature map contains NaN or Inf");
  }
}

Matrix FeatureMapStack::flattened() const {
  const Index pixels = static_cast<Index>(height) * width;
  Matrix m(channels, pixels);
  for (int c = 0; c < channels; ++c)
    for (Index p = 0; p < pixels; ++p)
      m(c, p) = data[static_cast<std::size_t>(c) * static_cast<std::size_t>(pixels) +
                     static_cast<std::size_t>(p)];
  return m;
}

Vector FeatureMapStack::pooled() const { return flattened().rowwise().mean(); }

Matrix bilinear_resize(const Matrix& src, int out_h, int out_w) {
  if (src.rows() < 1 || src.cols() < 1) throw DimensionError("cannot resize an empty map");
  if (out_h < 1 || out_w < 1) throw DimensionError("output size must be positive");
  if (src.rows() == out_h && src.cols() == out_w) return src;

  const Index h = src.rows();
  const Index w = src.cols();
  // Align-corners: output corners sample input corners exactly.
  auto coord = [](Index i, Index out, Index in) {
    return out > 1 ? static_cast<double>(i) * static_cast<double>(in - 1) /
                         static_cast<double>(out - 1)
                   : 0.0;
  };
  Matrix dst(out_h, out_w);
  for (Index i = 0; i < out_h; ++i) {
    const double y = coord(i, out_h, h);
    const Index y0 = std::min(static_cast<Index>(std::floor(y)), h - 1);
    const Index y1 = std::min(y0 + 1, h - 1);
    const double fy = y - static_cast<double>(y0);
    for (Index j = 0; j < out_w; ++j) {
      const double x = coord(j, out_w, w);
      const Index x0 = std::min(static_cast<Index>(std::floor(x)), w - 1);
      const Index x1 = std::min(x0 + 1, w - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = (1.0 - fx) * src(y0, x0) + fx * src(y0, x1);
      const double bottom = (1.0 - fx) * src(y1, x0) + fx * src(y1, x1);
      dst(i, j) = (1.0 - fy) * top + fy * bottom;
    }
  }
  return dst;
}

Matrix weighted_channel_map(const FeatureMapStack& fmap, const Vector& weights) {
  fmap.validate();
  if (weights.size() != fmap.channels) {
    throw DimensionError("channel weight vector has length " + std::to_string(weights.size()) +
                         ", feature map has " + std::to_string(fmap.channels) + " channels");
  }
  const Vector flat = fmap.flattened().transpose() * weights;
  Matrix map(fmap.height, fmap.width);
  for (int y = 0; y < fmap.height; ++y)
    for (int x = 0; x < fmap.width; ++x)
      map(y, x) = flat(static_cast<Index>(y) * fmap.width + x);
  return map;
}

ActivationMap cam_generate(const FeatureMapStack& fmap, const Vector& feature_vec,
                           const FactorModel& model, const LinearHead& head, int out_h,
                           int out_w, const SolverOptions& projection) {
  fmap.validate();
  if (model.U.rows() != fmap.channels) {
    throw DimensionError("model projects " + std::to_string(model.U.rows()) +
                         " features but the feature map has " + std::to_string(fmap.channels) +
                         " channels");
  }
  if (feature_vec.size() != fmap.channels) {
    throw DimensionError("feature vector length does not match channel count");
  }
  if (head.weights.rows() != model.U.cols() || head.bias.size() != head.weights.cols()) {
    throw DimensionError("head weights must be k x C with a length-C bias");
  }
  if (out_h < 1 || out_w < 1) throw DimensionError("output size must be positive");

  const Matrix v = project_test(Matrix(feature_vec), model, projection);
  const Vector z = head.logits(v.row(0).transpose());
  Index predicted = 0;
  z.maxCoeff(&predicted);

  ActivationMap out;
  out.predicted_class = static_cast<int>(predicted);
  out.class_score = softmax(z)(predicted);
  const Vector channel_weights = model.U * head.weights.col(predicted);
  out.raw = weighted_channel_map(fmap, channel_weights);

  const Matrix resized = bilinear_resize(out.raw, out_h, out_w);
  const double lo = resized.minCoeff();
  const double hi = resized.maxCoeff();
  if (hi > lo) {
    out.values = (resized.array() - lo) / (hi - lo);
  } else {
    out.values = Matrix::Zero(out_h, out_w);
    out.constant = true;
  }
  return out;
}

ActivationMap cam_generate(const FeatureMapStack& fmap, const Vector& feature_vec,
                           const FactorModel& model, const Matrix& W, int out_h, int out_w,
                           const SolverOptions& projection) {
  LinearHead head;
  head.weights = W;
  head.bias = Vector::Zero(W.cols());
  return cam_generate(fmap, feature_vec, model, head, out_h, out_w, projection);
}

}  // namespace nnsub
