#pragma once

// Experiment harness: stratified labeled subsets, accuracy / ROC metrics,
// repeated kNN runs over labeled-set sizes, and a PCA projection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dmmeeg/classify.hpp"
#include "dmmeeg/dataset.hpp"
#include "dmmeeg/dmm.hpp"

namespace dmmeeg {

/// Indices (ascending) of a stratified sample of size n. Class counts follow
/// largest-remainder apportionment with at least one sample per class.
inline std::vector<std::size_t> stratified_subsample_indices(const std::vector<Label>& labels, std::size_t n,
                                                            std::uint64_t seed) {
  const std::size_t total = labels.size();
  std::vector<std::size_t> members[2];
  for (std::size_t i = 0; i < total; ++i) members[static_cast<int>(labels[i])].push_back(i);
  if (members[0].empty() || members[1].empty()) throw DataError("stratification needs both classes present");
  if (n < 2) throw DataError("stratification needs n >= 2, got " + std::to_string(n));
  if (n > total) throw DataError("stratification asks for " + std::to_string(n) + " of " + std::to_string(total));

  std::size_t quota[2];
  double remainder[2];
  for (int c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(n) * static_cast<double>(members[c].size()) / static_cast<double>(total);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
  }
  while (quota[0] + quota[1] < n) {
    const int c = remainder[1] > remainder[0] ? 1 : 0;
    ++quota[c];
    remainder[c] = -1.0;
  }
  for (int c = 0; c < 2; ++c)
    if (quota[c] == 0) {
      quota[c] = 1;
      --quota[1 - c];
    }

  std::mt19937_64 rng(derive_seed(seed, {0x5ab5}));
  std::vector<std::size_t> chosen;
  for (int c = 0; c < 2; ++c) {
    auto pool = members[c];
    std::shuffle(pool.begin(), pool.end(), rng);
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

inline std::vector<std::string> stratified_subsample(const std::vector<std::string>& ids,
                                                     const std::vector<Label>& labels, std::size_t n,
                                                     std::uint64_t seed) {
  require_shape(ids.size() == labels.size(), "stratified_subsample: ids/labels length mismatch");
  std::vector<std::string> out;
  for (auto i : stratified_subsample_indices(labels, n, seed)) out.push_back(ids[i]);
  return out;
}

inline double accuracy(const std::vector<Label>& truth, const std::vector<Label>& predicted) {
  require_shape(truth.size() == predicted.size(), "accuracy: length mismatch");
  require_shape(!truth.empty(), "accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auroc = 0.0;
};

/// ROC by sweeping distinct score thresholds in descending order; tied
/// scores form one diagonal step. Area by the trapezoidal rule.
inline RocCurve roc_auroc(const std::vector<Label>& truth, const std::vector<double>& scores) {
  require_shape(truth.size() == scores.size(), "roc_auroc: length mismatch");
  const auto positives = static_cast<double>(std::count(truth.begin(), truth.end(), Label::abnormal));
  const auto negatives = static_cast<double>(truth.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) throw DataError("roc_auroc: undefined with a single class");
  for (double s : scores)
    if (!std::isfinite(s)) throw DataError("roc_auroc: scores must be finite");

  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0});
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (truth[order[j]] == Label::abnormal ? tp : fp) += 1.0;
      ++j;
    }
    const RocPoint prev = roc.points.back();
    const RocPoint next{fp / negatives, tp / positives};
    roc.auroc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) * 0.5;
    roc.points.push_back(next);
    i = j;
  }
  return roc;
}

// ---------------------------------------------------------------------------
// Experiment

enum class FeatureSpace { latent, input };

inline const char* to_string(FeatureSpace s) { return s == FeatureSpace::latent ? "latent" : "input"; }

/// Stands for "every labeled training sample" in ExperimentConfig::labeled_sizes.
inline constexpr std::size_t kAllLabeled = std::numeric_limits<std::size_t>::max();

struct ExperimentConfig {
  std::vector<std::size_t> labeled_sizes{5, 14, 27, 55, 137, 274, 548, 1370, kAllLabeled};
  int runs = 5;
  std::uint64_t seed = 0;
  FeatureSpace feature_space = FeatureSpace::latent;
  int tune_budget = 150;
  int tune_folds = 3;
  LatentAggregation aggregation = LatentAggregation::mean;

  void validate() const {
    if (labeled_sizes.empty()) throw ConfigError("labeled_sizes must not be empty");
    for (std::size_t i = 0; i < labeled_sizes.size(); ++i) {
      if (labeled_sizes[i] < 2) throw ConfigError("labeled sizes must be >= 2");
      if (i > 0 && labeled_sizes[i] <= labeled_sizes[i - 1]) throw ConfigError("labeled sizes must ascend");
    }
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (tune_budget < 1 || tune_folds < 2) throw ConfigError("tune budget >= 1 and folds >= 2 required");
  }
};

struct ExperimentRow {
  std::size_t labeled_size = 0;
  int run = 0;
  FeatureSpace space = FeatureSpace::latent;
  double accuracy = 0.0;
  double auroc = 0.0;
  RocCurve roc;
  KnnHyper hyper;
  double cv_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
};

struct SizeSummary {
  std::size_t labeled_size = 0;
  FeatureSpace space = FeatureSpace::latent;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double auroc_mean = 0.0, auroc_std = 0.0;
};

/// One feature row per sequence: mean-pooled guide latents or input time-means.
inline Matrix feature_matrix(FeatureSpace space, const DmmParams* params, const std::vector<FeatureSequence>& seqs,
                             LatentAggregation aggregation = LatentAggregation::mean) {
  if (seqs.empty()) return Matrix();
  if (space == FeatureSpace::latent && !params) throw ConfigError("latent features need trained DMM parameters");
  std::vector<Vector> rows;
  rows.reserve(seqs.size());
  for (const auto& fs : seqs)
    rows.push_back(space == FeatureSpace::latent ? extract_latents(*params, fs, aggregation) : time_mean(fs));
  Matrix out(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return out;
}

inline std::vector<Label> labels_of(const std::vector<FeatureSequence>& seqs) {
  std::vector<Label> out;
  for (const auto& fs : seqs) {
    if (!fs.label) throw DataError("sequence '" + fs.session_id + "' has no label");
    out.push_back(*fs.label);
  }
  return out;
}

struct EvaluatedRun {
  KnnHyper hyper;
  double cv_accuracy = std::numeric_limits<double>::quiet_NaN();
  double accuracy = 0.0;
  RocCurve roc;
};

/// Tune and fit kNN on one labeled subset and score it on the test features.
/// Subsets too small for two-fold CV fall back to k = 1.
inline EvaluatedRun evaluate_subset(const Matrix& train_features, const std::vector<Label>& train_labels,
                                    const Matrix& test_features, const std::vector<Label>& test_labels,
                                    int budget, int folds, std::uint64_t seed) {
  const auto n_abnormal = static_cast<int>(std::count(train_labels.begin(), train_labels.end(), Label::abnormal));
  const int minority = std::min(n_abnormal, static_cast<int>(train_labels.size()) - n_abnormal);
  EvaluatedRun out;
  const int usable_folds = std::min(folds, minority);
  if (usable_folds >= 2) {
    const auto tuned = tune(train_features, train_labels, budget, usable_folds, seed);
    out.hyper = tuned.best;
    out.cv_accuracy = tuned.cv_accuracy;
  }
  std::vector<std::string> ids(train_labels.size());
  const auto model = fit(train_features, train_labels, ids, out.hyper);
  std::vector<Label> predicted;
  std::vector<double> scores;
  for (Eigen::Index i = 0; i < test_features.rows(); ++i) {
    const auto p = predict(model, test_features.row(i).transpose());
    predicted.push_back(p.label);
    scores.push_back(p.score);
  }
  out.accuracy = accuracy(test_labels, predicted);
  out.roc = roc_auroc(test_labels, scores);
  return out;
}

/// Repeats stratified-subset kNN evaluation for every labeled size and run on
/// precomputed feature rows. Test labels are only read when scoring.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Matrix& train_features,
                                       const std::vector<Label>& train_labels, const Matrix& test_features,
                                       const std::vector<Label>& test_labels) {
  cfg.validate();
  require_shape(static_cast<std::size_t>(train_features.rows()) == train_labels.size() &&
                    static_cast<std::size_t>(test_features.rows()) == test_labels.size(),
                "run_experiment: feature rows and labels disagree");
  require_shape(train_features.cols() == test_features.cols(), "run_experiment: train and test feature dims differ");
  ExperimentResult result;
  for (auto requested : cfg.labeled_sizes) {
    const std::size_t size = requested == kAllLabeled ? train_labels.size() : requested;
    for (int run = 0; run < cfg.runs; ++run) {
      const auto seed = derive_seed(cfg.seed, {size, static_cast<std::uint64_t>(run)});
      const auto subset = stratified_subsample_indices(train_labels, size, seed);
      std::vector<Eigen::Index> rows(subset.begin(), subset.end());
      std::vector<Label> sub_labels;
      for (auto i : subset) sub_labels.push_back(train_labels[i]);
      const auto eval = evaluate_subset(train_features(rows, Eigen::all), sub_labels, test_features, test_labels,
                                        cfg.tune_budget, cfg.tune_folds, derive_seed(seed, {0x70e}));
      ExperimentRow row;
      row.labeled_size = size;
      row.run = run;
      row.space = cfg.feature_space;
      row.accuracy = eval.accuracy;
      row.auroc = eval.roc.auroc;
      row.roc = eval.roc;
      row.hyper = eval.hyper;
      row.cv_accuracy = eval.cv_accuracy;
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const DmmParams* params,
                                       const std::vector<FeatureSequence>& labeled_train,
                                       const std::vector<FeatureSequence>& test) {
  cfg.validate();
  return run_experiment(cfg, feature_matrix(cfg.feature_space, params, labeled_train, cfg.aggregation),
                        labels_of(labeled_train), feature_matrix(cfg.feature_space, params, test, cfg.aggregation),
                        labels_of(test));
}

/// Mean and sample standard deviation per (space, size), recomputed from rows.
inline std::vector<SizeSummary> summarize(const ExperimentResult& result) {
  std::map<std::pair<int, std::size_t>, std::vector<const ExperimentRow*>> groups;
  for (const auto& r : result.rows) groups[{static_cast<int>(r.space), r.labeled_size}].push_back(&r);
  std::vector<SizeSummary> out;
  for (const auto& [key, rows] : groups) {
    auto stats = [&](auto get, double& mean, double& sd) {
      mean = 0.0;
      for (const auto* r : rows) mean += get(*r);
      mean /= static_cast<double>(rows.size());
      double ss = 0.0;
      for (const auto* r : rows) ss += (get(*r) - mean) * (get(*r) - mean);
      sd = rows.size() > 1 ? std::sqrt(ss / static_cast<double>(rows.size() - 1)) : 0.0;
    };
    SizeSummary s;
    s.space = static_cast<FeatureSpace>(key.first);
    s.labeled_size = key.second;
    stats([](const ExperimentRow& r) { return r.accuracy; }, s.accuracy_mean, s.accuracy_std);
    stats([](const ExperimentRow& r) { return r.auroc; }, s.auroc_mean, s.auroc_std);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Projection

struct Projection {
  Matrix coords;          // N x dims
  Vector explained;       // fraction of total variance per component, descending
  Matrix components;      // F x dims loadings
};

/// Mean-centered projection onto the top principal directions. Each
/// component's largest-magnitude loading is made positive.
inline Projection pca_project(const Matrix& features, Eigen::Index dims = 2) {
  if (features.rows() < 2) throw DataError("pca_project needs at least two rows");
  const auto f = features.cols();
  const Matrix centered = features.rowwise() - features.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(features.rows() - 1);
  Projection out;
  out.coords = Matrix::Zero(features.rows(), dims);
  out.explained = Vector::Zero(dims);
  out.components = Matrix::Zero(f, dims);
  const double total = cov.trace();
  if (!(total > 0.0)) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  for (Eigen::Index c = 0; c < dims && c < f; ++c) {
    const Eigen::Index src = f - 1 - c;  // eigenvalues are ascending
    Vector v = eig.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    out.components.col(c) = v;
    out.explained[c] = std::max(0.0, eig.eigenvalues()[src]) / total;
    out.coords.col(c) = centered * v;
  }
  return out;
}

/// Mean silhouette coefficient of a two-class labeling under Euclidean distance.
inline double silhouette(const Matrix& points, const std::vector<Label>& labels) {
  require_shape(static_cast<std::size_t>(points.rows()) == labels.size(), "silhouette: length mismatch");
  const auto n = points.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double same = 0.0, other = 0.0;
    std::size_t n_same = 0, n_other = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = (points.row(i) - points.row(j)).norm();
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        same += d;
        ++n_same;
      } else {
        other += d;
        ++n_other;
      }
    }
    if (n_same == 0 || n_other == 0) continue;  // singleton cluster scores 0
    const double a = same / static_cast<double>(n_same);
    const double b = other / static_cast<double>(n_other);
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

}  // namespace dmmeeg
