#ifndef NNSUB_CAM_HPP
#define NNSUB_CAM_HPP

#include <string>
#include <vector>

#include "nnsub/factorize.hpp"
#include "nnsub/fewshot.hpp"
#include "nnsub/types.hpp"

namespace nnsub {

/// c x h x w activations of one image, stored channel-major then row-major.
struct FeatureMapStack {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;
  std::string source_id;

  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * static_cast<std::size_t>(height) +
                 static_cast<std::size_t>(y)) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)];
  }

  /// Throws DimensionError / NumericError.
  void validate() const;

  /// c x (h*w), pixel index p = y * w + x.
  Matrix flattened() const;

  /// Spatial mean of each channel (global average pooling).
  Vector pooled() const;
};

struct ActivationMap {
  Matrix values;  // out_h x out_w, min-max normalised to [0, 1]
  Matrix raw;     // h x w map before resizing and normalisation
  int predicted_class = 0;
  double class_score = 0.0;
  /// Set when the resized map is constant; values are then all zero.
  bool constant = false;
};

/// Align-corners bilinear interpolation. Output equals input when sizes match.
Matrix bilinear_resize(const Matrix& src, int out_h, int out_w);

/// h x w map of sum_n weights(n) * M[n, y, x].
Matrix weighted_channel_map(const FeatureMapStack& fmap, const Vector& weights);

/// Class activation map through the subspace: v = projection of
/// feature_vec, predicted class i = argmax(v^T W + b), channel weights
/// x' = U w_i (bias excluded), R' = x'^T M reshaped, resized and normalised.
ActivationMap cam_generate(const FeatureMapStack& fmap, const Vector& feature_vec,
                           const FactorModel& model, const LinearHead& head, int out_h,
                           int out_w, const SolverOptions& projection);

/// Variant taking a bare k x C weight matrix (zero bias).
ActivationMap cam_generate(const FeatureMapStack& fmap, const Vector& feature_vec,
                           const FactorModel& model, const Matrix& W, int out_h, int out_w,
                           const SolverOptions& projection);

}  // namespace nnsub

#endif  // NNSUB_CAM_HPP
