#ifndef NNSUB_FEWSHOT_HPP
#define NNSUB_FEWSHOT_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nnsub/factorize.hpp"
#include "nnsub/types.hpp"

namespace nnsub {

/// Features are stored one column per sample (M x N).
struct FeatureDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  bool nonneg = false;

  Index dims() const noexcept { return features.rows(); }
  Index samples() const noexcept { return features.cols(); }
  int classes() const noexcept { return static_cast<int>(class_names.size()); }

  /// Checks shapes, label range, that every class is populated and
  /// recomputes the nonneg flag. Throws DimensionError / LabelError /
  /// NumericError.
  void validate();

  /// Columns in the given order; class names are kept, so classes absent from
  /// the subset are allowed here.
  FeatureDataset subset(std::span<const std::size_t> columns) const;
};

/// Isotropic unit-variance Gaussian classes whose centroids sit pairwise
/// `separation` apart along random orthonormal directions, offset by
/// 8 + separation so that entries are non-negative in practice (any
/// negative draw is clipped to zero). Requires dims >= classes.
FeatureDataset make_gaussian_classes(Index dims, Index per_class, int classes,
                                     double separation, std::uint64_t seed);

/// Default names "class0", "class1", ...
std::vector<std::string> default_class_names(int classes);

/// Concatenates samples of two datasets with identical dims and classes.
FeatureDataset concat(const FeatureDataset& a, const FeatureDataset& b);

/// Returns a copy whose labels are a seeded permutation of the originals.
FeatureDataset permute_labels(const FeatureDataset& data, std::uint64_t seed);

struct StandardizeStats {
  Vector mean;
  Vector scale;  // population standard deviation, 1 for constant features
};

struct Standardized {
  FeatureDataset train;
  FeatureDataset test;
  StandardizeStats stats;
};

/// Per-feature z-scoring with statistics from train only.
Standardized standardize(const FeatureDataset& train, const FeatureDataset& test);

struct EpisodeSpec {
  int ways = 2;
  int shots = 10;
  int query_per_class = 10;
  int repeats = 10;
  std::uint64_t seed = 0;
};

struct Episode {
  FeatureDataset support;
  FeatureDataset query;
};

/// Draws a C-way l-shot episode. When ways is below the dataset's class
/// count, a seeded subset of classes is used and relabelled 0..ways-1 in
/// ascending original order. Deterministic in (spec.seed, run_index).
Episode sample_episode(const FeatureDataset& data, const EpisodeSpec& spec, int run_index);

enum class Distance { Euclidean, Cosine };
std::string_view distance_name(Distance d) noexcept;
Distance parse_distance(std::string_view name);

/// Rows of support_V and query_V are samples. Majority vote over the K
/// nearest (distance ties go to the lower support index); vote ties go to
/// the tied class whose member ranks nearest.
std::vector<int> knn_predict(const Matrix& support_V, std::span<const int> support_labels,
                             const Matrix& query_V, int K,
                             Distance distance = Distance::Euclidean);

struct HeadOptions {
  int epochs = 500;
  double lr = 0.1;
  std::uint64_t seed = 0;
};

/// Fully connected classifier z = v^T W + b on subspace coordinates.
struct LinearHead {
  Matrix weights;  // k x C
  Vector bias;     // C
  std::vector<double> loss_trace;

  Vector logits(const Vector& v) const;
  int predict(const Vector& v) const;
  std::vector<int> predict_rows(const Matrix& V) const;
};

/// Numerically stable softmax.
Vector softmax(const Vector& z);

/// Mean multinomial cross-entropy of softmax(features * W) against labels.
/// features is N x d, W is d x C. When gradient is non-null it receives
/// dLoss/dW.
double softmax_cross_entropy(const Matrix& features, std::span<const int> labels,
                             const Matrix& W, Matrix* gradient);

/// Full-batch gradient descent with step halving whenever a step fails to
/// lower the loss. Inputs are z-scored internally and the result is folded
/// back so that weights/bias act on raw V rows. The bias is trained as the
/// weight of an appended constant coordinate.
LinearHead train_linear_head(const Matrix& V, std::span<const int> labels, int classes,
                             const HeadOptions& options);

enum class Classifier { Knn, Linear };
enum class Protocol { Resample, Episode };

struct EvalConfig {
  Method method = Method::SVD;
  int k = 30;
  Hyper hyper;
  int knn_k = 5;
  int repeats = 10;
  std::uint64_t seed = 0;
  Distance distance = Distance::Euclidean;
  Classifier classifier = Classifier::Knn;
  HeadOptions head;
  bool standardize = false;
  /// Resample: the train/test partition is redrawn every repeat with the
  /// per-class counts of the given split. Off reuses the given split.
  bool resample = true;
  Protocol protocol = Protocol::Resample;
  EpisodeSpec episode;
  /// Worker threads for repeats; 0 picks hardware concurrency. Results do
  /// not depend on it.
  int threads = 1;
};

struct EvalReport {
  std::vector<double> per_run_accuracy;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  EvalConfig config;
};

/// Fits on train, projects test with frozen U, classifies and reports
/// accuracy over config.repeats runs.
EvalReport evaluate(const FeatureDataset& train, const FeatureDataset& test,
                    const EvalConfig& config);

/// Same pipeline over config.episode.repeats sampled episodes of data.
EvalReport evaluate_episodes(const FeatureDataset& data, const EvalConfig& config);

/// One fit / project / classify round; returns accuracy on test.
double run_once(const FeatureDataset& train, const FeatureDataset& test,
                const EvalConfig& config, std::uint64_t run_seed);

}  // namespace nnsub

#endif  // NNSUB_FEWSHOT_HPP
