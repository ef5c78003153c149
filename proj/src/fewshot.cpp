#include "nnsub/fewshot.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "nnsub/error.hpp"

namespace nnsub {

void FeatureDataset::validate() {
  if (features.rows() < 1 || features.cols() < 1) {
    throw DimensionError("dataset needs at least one feature and one sample");
  }
  if (static_cast<Index>(labels.size()) != features.cols()) {
    throw DimensionError("dataset has " + std::to_string(features.cols()) + " samples but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (class_names.empty()) throw LabelError("dataset declares no classes");
  require_finite(features, "feature matrix");
  std::vector<int> counts(class_names.size(), 0);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const int label = labels[j];
    if (label < 0 || label >= classes()) {
      throw LabelError("sample " + std::to_string(j) + " has label " + std::to_string(label) +
                       " outside [0, " + std::to_string(classes()) + ")");
    }
    ++counts[static_cast<std::size_t>(label)];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw LabelError("class '" + class_names[c] + "' has no samples");
  }
  nonneg = features.minCoeff() >= 0.0;
}

FeatureDataset FeatureDataset::subset(std::span<const std::size_t> columns) const {
  FeatureDataset out;
  out.features.resize(features.rows(), static_cast<Index>(columns.size()));
  out.labels.reserve(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out.features.col(static_cast<Index>(j)) = features.col(static_cast<Index>(columns[j]));
    out.labels.push_back(labels[columns[j]]);
  }
  out.class_names = class_names;
  out.nonneg = out.features.size() == 0 || out.features.minCoeff() >= 0.0;
  return out;
}

FeatureDataset make_gaussian_classes(Index dims, Index per_class, int classes,
                                     double separation, std::uint64_t seed) {
  if (classes < 1 || per_class < 1 || dims < classes) {
    throw DimensionError("synthetic data needs dims >= classes >= 1 and per_class >= 1");
  }
  if (!(separation >= 0.0)) throw ConfigError("separation must be >= 0");
  Engine engine(seed);
  Matrix directions(dims, classes);
  for (Index j = 0; j < classes; ++j)
    for (Index i = 0; i < dims; ++i) directions(i, j) = standard_normal(engine);
  const Matrix basis = Eigen::HouseholderQR<Matrix>(directions).householderQ() *
                       Matrix::Identity(dims, classes);
  const Matrix centroids =
      (basis * (separation / std::sqrt(2.0))).array() + (8.0 + separation);

  FeatureDataset data;
  data.features.resize(dims, per_class * classes);
  data.class_names = default_class_names(classes);
  Index col = 0;
  for (int c = 0; c < classes; ++c) {
    for (Index s = 0; s < per_class; ++s, ++col) {
      for (Index i = 0; i < dims; ++i) {
        data.features(i, col) = std::max(0.0, centroids(i, c) + standard_normal(engine));
      }
      data.labels.push_back(c);
    }
  }
  data.validate();
  return data;
}

std::vector<std::string> default_class_names(int classes) {
  std::vector<std::string> names;
  for (int c = 0; c < classes; ++c) names.push_back("class" + std::to_string(c));
  return names;
}

FeatureDataset concat(const FeatureDataset& a, const FeatureDataset& b) {
  if (a.dims() != b.dims()) {
    throw DimensionError("feature dimensions differ: " + std::to_string(a.dims()) + " vs " +
                         std::to_string(b.dims()));
  }
  if (a.classes() != b.classes()) throw LabelMismatchError("class counts differ");
  FeatureDataset out;
  out.features.resize(a.dims(), a.samples() + b.samples());
  out.features << a.features, b.features;
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.class_names = a.class_names;
  out.nonneg = a.nonneg && b.nonneg;
  return out;
}

FeatureDataset permute_labels(const FeatureDataset& data, std::uint64_t seed) {
  FeatureDataset out = data;
  std::vector<std::size_t> order(data.labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Engine engine(seed);
  shuffle_indices(order, engine);
  for (std::size_t j = 0; j < order.size(); ++j) out.labels[j] = data.labels[order[j]];
  return out;
}

Standardized standardize(const FeatureDataset& train, const FeatureDataset& test) {
  if (train.dims() != test.dims()) {
    throw DimensionError("train has " + std::to_string(train.dims()) + " features, test has " +
                         std::to_string(test.dims()));
  }
  if (train.samples() < 1) throw DimensionError("empty training set");
  Standardized out{train, test, {}};
  const double n = static_cast<double>(train.samples());
  out.stats.mean = train.features.rowwise().mean();
  const Matrix centered = train.features.colwise() - out.stats.mean;
  out.stats.scale = (centered.rowwise().squaredNorm() / n).cwiseSqrt();
  for (Index i = 0; i < out.stats.scale.size(); ++i) {
    if (!(out.stats.scale(i) > 0.0)) out.stats.scale(i) = 1.0;
  }
  auto apply = [&](Matrix& f) {
    f = (f.colwise() - out.stats.mean).array().colwise() / out.stats.scale.array();
  };
  apply(out.train.features);
  apply(out.test.features);
  out.train.nonneg = out.train.features.minCoeff() >= 0.0;
  out.test.nonneg = out.test.features.minCoeff() >= 0.0;
  return out;
}

Episode sample_episode(const FeatureDataset& data, const EpisodeSpec& spec, int run_index) {
  if (spec.ways < 2) throw ConfigError("episode ways must be >= 2");
  if (spec.shots < 1) throw ConfigError("episode shots must be >= 1");
  if (spec.query_per_class < 0) throw ConfigError("query_per_class must be >= 0");
  if (spec.ways > data.classes()) {
    throw InsufficientSamplesError("episode asks for " + std::to_string(spec.ways) +
                                   " classes but the dataset has " +
                                   std::to_string(data.classes()));
  }
  Engine engine(derive_seed(spec.seed, static_cast<std::uint64_t>(run_index)));

  std::vector<std::size_t> chosen(static_cast<std::size_t>(data.classes()));
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  if (spec.ways < data.classes()) {
    shuffle_indices(chosen, engine);
    chosen.resize(static_cast<std::size_t>(spec.ways));
    std::sort(chosen.begin(), chosen.end());
  }

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.classes()));
  for (std::size_t j = 0; j < data.labels.size(); ++j) {
    by_class[static_cast<std::size_t>(data.labels[j])].push_back(j);
  }

  const auto need = static_cast<std::size_t>(spec.shots + spec.query_per_class);
  std::vector<std::size_t> support_idx, query_idx;
  std::vector<int> support_labels, query_labels;
  for (std::size_t slot = 0; slot < chosen.size(); ++slot) {
    auto pool = by_class[chosen[slot]];
    if (pool.size() < need) {
      throw InsufficientSamplesError("class '" + data.class_names[chosen[slot]] + "' has " +
                                     std::to_string(pool.size()) + " samples, episode needs " +
                                     std::to_string(need));
    }
    shuffle_indices(pool, engine);
    for (std::size_t i = 0; i < need; ++i) {
      const bool support = i < static_cast<std::size_t>(spec.shots);
      (support ? support_idx : query_idx).push_back(pool[i]);
      (support ? support_labels : query_labels).push_back(static_cast<int>(slot));
    }
  }

  std::vector<std::string> names;
  for (std::size_t c : chosen) names.push_back(data.class_names[c]);
  Episode episode{data.subset(support_idx), data.subset(query_idx)};
  episode.support.labels = std::move(support_labels);
  episode.query.labels = std::move(query_labels);
  episode.support.class_names = names;
  episode.query.class_names = names;
  return episode;
}

std::string_view distance_name(Distance d) noexcept {
  return d == Distance::Euclidean ? "euclidean" : "cosine";
}

Distance parse_distance(std::string_view name) {
  if (name == "euclidean") return Distance::Euclidean;
  if (name == "cosine") return Distance::Cosine;
  throw ConfigError("unknown distance '" + std::string(name) + "'");
}

std::vector<int> knn_predict(const Matrix& support_V, std::span<const int> support_labels,
                             const Matrix& query_V, int K, Distance distance) {
  if (K < 1) throw DimensionError("K must be >= 1");
  if (static_cast<Index>(support_labels.size()) != support_V.rows()) {
    throw DimensionError("support labels do not match support rows");
  }
  if (support_V.rows() < K) {
    throw DimensionError("K = " + std::to_string(K) + " exceeds support size " +
                         std::to_string(support_V.rows()));
  }
  if (support_V.cols() != query_V.cols()) {
    throw DimensionError("support and query dimensions differ");
  }
  const int max_label = *std::max_element(support_labels.begin(), support_labels.end());
  if (*std::min_element(support_labels.begin(), support_labels.end()) < 0) {
    throw LabelError("negative support label");
  }

  const Index ns = support_V.rows();
  Vector support_norms, query_norms;
  if (distance == Distance::Cosine) {
    support_norms = support_V.rowwise().norm();
    query_norms = query_V.rowwise().norm();
  }

  std::vector<int> predictions;
  predictions.reserve(static_cast<std::size_t>(query_V.rows()));
  std::vector<std::pair<double, Index>> order(static_cast<std::size_t>(ns));
  std::vector<int> votes(static_cast<std::size_t>(max_label) + 1);
  std::vector<int> first_rank(votes.size());

  for (Index q = 0; q < query_V.rows(); ++q) {
    for (Index s = 0; s < ns; ++s) {
      double d;
      if (distance == Distance::Euclidean) {
        d = (support_V.row(s) - query_V.row(q)).squaredNorm();
      } else {
        const double scale = support_norms(s) * query_norms(q);
        const double cosine = scale > 0.0 ? support_V.row(s).dot(query_V.row(q)) / scale : 0.0;
        d = 1.0 - cosine;
      }
      order[static_cast<std::size_t>(s)] = {d, s};
    }
    std::partial_sort(order.begin(), order.begin() + K, order.end());

    std::fill(votes.begin(), votes.end(), 0);
    std::fill(first_rank.begin(), first_rank.end(), K);
    for (int r = 0; r < K; ++r) {
      const auto label = static_cast<std::size_t>(support_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)].second)]);
      ++votes[label];
      first_rank[label] = std::min(first_rank[label], r);
    }
    int best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c) {
      const auto b = static_cast<std::size_t>(best);
      if (votes[c] > votes[b] || (votes[c] == votes[b] && first_rank[c] < first_rank[b])) {
        best = static_cast<int>(c);
      }
    }
    predictions.push_back(best);
  }
  return predictions;
}

Vector softmax(const Vector& z) {
  const double top = z.maxCoeff();
  Vector e = (z.array() - top).exp();
  return e / e.sum();
}

double softmax_cross_entropy(const Matrix& features, std::span<const int> labels,
                             const Matrix& W, Matrix* gradient) {
  const Index n = features.rows();
  if (static_cast<Index>(labels.size()) != n) throw DimensionError("label count mismatch");
  if (features.cols() != W.rows()) throw DimensionError("weight rows do not match features");
  Matrix logits = features * W;
  const Vector top = logits.rowwise().maxCoeff();
  logits.colwise() -= top;
  Matrix prob = logits.array().exp();
  const Vector sums = prob.rowwise().sum();
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    loss -= logits(i, y) - std::log(sums(i));
    prob.row(i) /= sums(i);
  }
  loss /= static_cast<double>(n);
  if (gradient) {
    for (Index i = 0; i < n; ++i) prob(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    *gradient = features.transpose() * prob / static_cast<double>(n);
  }
  return loss;
}

Vector LinearHead::logits(const Vector& v) const {
  if (v.size() != weights.rows()) throw DimensionError("subspace vector length mismatch");
  return weights.transpose() * v + bias;
}

int LinearHead::predict(const Vector& v) const {
  Index arg = 0;
  logits(v).maxCoeff(&arg);
  return static_cast<int>(arg);
}

std::vector<int> LinearHead::predict_rows(const Matrix& V) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(V.rows()));
  for (Index i = 0; i < V.rows(); ++i) out.push_back(predict(V.row(i).transpose()));
  return out;
}

LinearHead train_linear_head(const Matrix& V, std::span<const int> labels, int classes,
                             const HeadOptions& options) {
  if (V.rows() < 1 || V.cols() < 1) throw DimensionError("empty subspace matrix");
  if (static_cast<Index>(labels.size()) != V.rows()) throw DimensionError("label count mismatch");
  if (classes < 2) throw LabelError("a linear head needs at least two classes");
  for (int y : labels) {
    if (y < 0 || y >= classes) throw LabelError("label outside [0, classes)");
  }
  if (std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) == labels.end()) {
    throw LabelError("training labels contain a single class");
  }
  if (options.epochs < 0 || !(options.lr > 0.0)) throw ConfigError("invalid head options");
  require_finite(V, "subspace matrix");

  const Index k = V.cols();
  const Vector mean = V.colwise().mean().transpose();
  Vector scale = ((V.rowwise() - mean.transpose()).colwise().squaredNorm() /
                  static_cast<double>(V.rows()))
                     .cwiseSqrt()
                     .transpose();
  for (Index j = 0; j < k; ++j) {
    if (!(scale(j) > 0.0)) scale(j) = 1.0;
  }
  Matrix features(V.rows(), k + 1);
  features.leftCols(k) = (V.rowwise() - mean.transpose()).array().rowwise() /
                         scale.transpose().array();
  features.col(k).setOnes();

  Engine engine(options.seed);
  Matrix W(k + 1, classes);
  for (Index j = 0; j < W.cols(); ++j)
    for (Index i = 0; i < W.rows(); ++i) W(i, j) = 0.02 * uniform_closed_open(engine) - 0.01;

  LinearHead head;
  Matrix grad;
  double loss = softmax_cross_entropy(features, labels, W, &grad);
  head.loss_trace.push_back(loss);
  double lr = options.lr;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    bool stepped = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      const Matrix trial = W - lr * grad;
      Matrix trial_grad;
      const double trial_loss = softmax_cross_entropy(features, labels, trial, &trial_grad);
      if (std::isnan(trial_loss)) throw NumericError("linear head loss diverged to NaN");
      if (trial_loss < loss) {
        W = trial;
        grad = std::move(trial_grad);
        loss = trial_loss;
        stepped = true;
        break;
      }
      lr *= 0.5;
    }
    if (!stepped) break;
    head.loss_trace.push_back(loss);
  }

  head.weights = W.topRows(k).array().colwise() / scale.array();
  head.bias = W.row(k).transpose() - head.weights.transpose() * mean;
  return head;
}

namespace {

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

void check_config(const EvalConfig& config) {
  if (config.k < 1) throw ConfigError("k must be >= 1");
  if (config.knn_k < 1) throw ConfigError("K must be >= 1");
  if (config.repeats < 1) throw ConfigError("repeats must be >= 1");
  if (config.standardize && is_nmf_family(config.method)) {
    throw ConfigError("standardization makes features signed; it cannot be combined with " +
                      std::string(method_name(config.method)));
  }
}

// Balanced re-partition: each class keeps its train/test counts from the
// given split, drawn from the pooled samples of that class.
std::pair<FeatureDataset, FeatureDataset> resample_split(const FeatureDataset& pool,
                                                         std::span<const int> train_counts,
                                                         std::span<const int> test_counts,
                                                         Engine& engine) {
  std::vector<std::size_t> train_idx, test_idx;
  for (int c = 0; c < pool.classes(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < pool.labels.size(); ++j) {
      if (pool.labels[j] == c) members.push_back(j);
    }
    shuffle_indices(members, engine);
    const auto ntr = static_cast<std::size_t>(train_counts[static_cast<std::size_t>(c)]);
    const auto nte = static_cast<std::size_t>(test_counts[static_cast<std::size_t>(c)]);
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(ntr));
    test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(ntr),
                    members.begin() + static_cast<std::ptrdiff_t>(ntr + nte));
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {pool.subset(train_idx), pool.subset(test_idx)};
}

template <typename RunFn>
EvalReport run_repeats(int repeats, const EvalConfig& config, RunFn run) {
  EvalReport report;
  report.config = config;
  report.per_run_accuracy.assign(static_cast<std::size_t>(repeats), 0.0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(repeats));

  unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(repeats));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < repeats; r = next++) {
      try {
        report.per_run_accuracy[static_cast<std::size_t>(r)] = run(r);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const double n = static_cast<double>(repeats);
  double sum = 0.0;
  for (double a : report.per_run_accuracy) sum += a;
  report.mean = sum / n;
  double var = 0.0;
  for (double a : report.per_run_accuracy) var += (a - report.mean) * (a - report.mean);
  report.std = std::sqrt(var / n);
  return report;
}

}  // namespace

double run_once(const FeatureDataset& train, const FeatureDataset& test,
                const EvalConfig& config, std::uint64_t run_seed) {
  if (train.dims() != test.dims()) throw DimensionError("train/test feature dimensions differ");
  if (test.samples() < 1) throw DimensionError("empty test set");
  const FeatureDataset* tr = &train;
  const FeatureDataset* te = &test;
  Standardized z;
  if (config.standardize) {
    z = standardize(train, test);
    tr = &z.train;
    te = &z.test;
  }

  const LabelMatrix labels(tr->labels, tr->classes());
  const FactorModel model =
      fit(config.method, tr->features, &labels, config.k, config.hyper, derive_seed(run_seed, 1));
  const SolverOptions projection{config.hyper.iters, config.hyper.tol, config.hyper.eps,
                                 derive_seed(run_seed, 2)};
  const Matrix v_test = project_test(te->features, model, projection);

  std::vector<int> predicted;
  if (config.classifier == Classifier::Knn) {
    predicted = knn_predict(model.V, tr->labels, v_test, config.knn_k, config.distance);
  } else {
    HeadOptions head = config.head;
    head.seed = derive_seed(run_seed, 3);
    predicted = train_linear_head(model.V, tr->labels, tr->classes(), head).predict_rows(v_test);
  }
  return accuracy(predicted, te->labels);
}

EvalReport evaluate(const FeatureDataset& train, const FeatureDataset& test,
                    const EvalConfig& config) {
  check_config(config);
  if (train.dims() != test.dims()) {
    throw DimensionError("train has " + std::to_string(train.dims()) + " features, test has " +
                         std::to_string(test.dims()));
  }
  if (train.classes() != test.classes()) throw LabelMismatchError("train/test class counts differ");

  std::vector<int> train_counts(static_cast<std::size_t>(train.classes()), 0);
  std::vector<int> test_counts(train_counts.size(), 0);
  for (int y : train.labels) ++train_counts[static_cast<std::size_t>(y)];
  for (int y : test.labels) ++test_counts[static_cast<std::size_t>(y)];
  const FeatureDataset pool = config.resample ? concat(train, test) : FeatureDataset{};

  return run_repeats(config.repeats, config, [&](int r) {
    const std::uint64_t run_seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    if (!config.resample) return run_once(train, test, config, run_seed);
    Engine engine(derive_seed(run_seed, 0));
    const auto [tr, te] = resample_split(pool, train_counts, test_counts, engine);
    return run_once(tr, te, config, run_seed);
  });
}

EvalReport evaluate_episodes(const FeatureDataset& data, const EvalConfig& config) {
  check_config(config);
  if (config.episode.repeats < 1) throw ConfigError("episode repeats must be >= 1");
  return run_repeats(config.episode.repeats, config, [&](int r) {
    const Episode episode = sample_episode(data, config.episode, r);
    const std::uint64_t run_seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    return run_once(episode.support, episode.query, config, run_seed);
  });
}

}  // namespace nnsub
