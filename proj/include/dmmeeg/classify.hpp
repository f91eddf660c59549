#pragma once

// k-nearest-neighbor classification over fixed-length feature vectors,
// with example-based explanations and seeded random-search tuning.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dmmeeg/dataset.hpp"

namespace dmmeeg {

enum class KnnWeighting { uniform, inverse_distance };
enum class KnnMetric { euclidean, manhattan };

inline const char* to_string(KnnWeighting w) { return w == KnnWeighting::uniform ? "uniform" : "inverse_distance"; }
inline const char* to_string(KnnMetric m) { return m == KnnMetric::euclidean ? "euclidean" : "manhattan"; }

struct KnnHyper {
  int k = 1;
  KnnWeighting weighting = KnnWeighting::uniform;
  KnnMetric metric = KnnMetric::euclidean;

  friend bool operator==(const KnnHyper&, const KnnHyper&) = default;
};

struct KnnModel {
  Matrix features;  // N x F, one sample per row
  std::vector<Label> labels;
  std::vector<std::string> sample_ids;
  KnnHyper hyper;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

struct Neighbor {
  Eigen::Index index = 0;
  double distance = 0.0;
};

struct Prediction {
  Label label = Label::normal;
  double score = 0.0;  // weighted fraction of abnormal neighbors
};

inline void validate_hyper(const KnnHyper& h) {
  if (h.k < 1 || h.k % 2 == 0) throw ConfigError("k must be odd and >= 1, got " + std::to_string(h.k));
}

inline KnnModel fit(Matrix features, std::vector<Label> labels, std::vector<std::string> ids, KnnHyper hyper) {
  validate_hyper(hyper);
  require_shape(static_cast<std::size_t>(features.rows()) == labels.size() && labels.size() == ids.size(),
                "kNN fit: features, labels and ids disagree in length");
  if (features.rows() < hyper.k)
    throw DataError("kNN fit: insufficient data (" + std::to_string(features.rows()) + " samples for k=" +
                    std::to_string(hyper.k) + ")");
  if (!features.allFinite()) throw DataError("kNN fit: features must be finite");
  return KnnModel{std::move(features), std::move(labels), std::move(ids), hyper};
}

template <class A, class B>
double distance(KnnMetric metric, const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (metric == KnnMetric::manhattan) return (a - b).cwiseAbs().sum();
  return (a - b).norm();
}

/// The k stored rows closest to `query`, ascending by distance, ties by index.
inline std::vector<Neighbor> kneighbors(const KnnModel& model, const Vector& query, int k) {
  require_shape(query.size() == model.dim(), "kNN query has dim " + std::to_string(query.size()) +
                                                 ", model has " + std::to_string(model.dim()));
  if (k < 1 || k > model.size()) throw DataError("kneighbors: k=" + std::to_string(k) + " outside [1, N]");
  std::vector<Neighbor> all(static_cast<std::size_t>(model.size()));
  for (Eigen::Index i = 0; i < model.size(); ++i)
    all[static_cast<std::size_t>(i)] = {i, distance(model.hyper.metric, model.features.row(i).transpose(), query)};
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  std::partial_sort(all.begin(), all.begin() + k, all.end(), closer);
  all.resize(static_cast<std::size_t>(k));
  return all;
}

inline Prediction predict(const KnnModel& model, const Vector& query) {
  const auto nbrs = kneighbors(model, query, model.hyper.k);
  double abnormal = 0.0, total = 0.0;
  for (const auto& n : nbrs) {
    const double w = model.hyper.weighting == KnnWeighting::uniform ? 1.0 : 1.0 / std::max(n.distance, 1e-12);
    total += w;
    if (model.labels[static_cast<std::size_t>(n.index)] == Label::abnormal) abnormal += w;
  }
  Prediction p;
  p.score = abnormal / total;
  p.label = p.score > 0.5 ? Label::abnormal : Label::normal;
  return p;
}

struct Explanation {
  std::string sample_id;
  Label label = Label::normal;
  double distance = 0.0;
  const FeatureSequence* input_space = nullptr;
};

using SampleResolver = std::function<const FeatureSequence*(const std::string&)>;

/// Nearest labeled examples joined with their input-space sequences.
inline std::vector<Explanation> explain(const KnnModel& model, const Vector& query, int k,
                                        const SampleResolver& resolve) {
  std::vector<Explanation> out;
  for (const auto& n : kneighbors(model, query, k)) {
    const auto idx = static_cast<std::size_t>(n.index);
    const FeatureSequence* ref = resolve ? resolve(model.sample_ids[idx]) : nullptr;
    if (!ref) throw DataError("explain: missing sample '" + model.sample_ids[idx] + "'");
    out.push_back({model.sample_ids[idx], model.labels[idx], n.distance, ref});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tuning

/// Stratified fold index per sample: each class is shuffled and dealt round-robin.
inline std::vector<int> stratified_folds(const std::vector<Label>& labels, int folds, std::mt19937_64& rng) {
  std::vector<int> fold(labels.size(), 0);
  for (Label cls : {Label::normal, Label::abnormal}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < members.size(); ++j) fold[members[j]] = static_cast<int>(j % static_cast<std::size_t>(folds));
  }
  return fold;
}

/// Mean over folds of held-out accuracy.
inline double cross_validated_accuracy(const Matrix& features, const std::vector<Label>& labels,
                                       const std::vector<int>& fold, int folds, const KnnHyper& hyper) {
  double total = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train_rows, test_rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      (fold[i] == f ? test_rows : train_rows).push_back(static_cast<Eigen::Index>(i));
    KnnModel m;
    m.features = features(train_rows, Eigen::all);
    for (auto r : train_rows) m.labels.push_back(labels[static_cast<std::size_t>(r)]);
    m.sample_ids.resize(train_rows.size());
    m.hyper = hyper;
    std::size_t correct = 0;
    for (auto r : test_rows)
      if (predict(m, features.row(r).transpose()).label == labels[static_cast<std::size_t>(r)]) ++correct;
    total += static_cast<double>(correct) / static_cast<double>(test_rows.size());
  }
  return total / folds;
}

struct TuneTrial {
  KnnHyper hyper;
  double cv_accuracy = 0.0;
};

struct TuneResult {
  KnnHyper best;
  double cv_accuracy = 0.0;
  std::vector<TuneTrial> trials;
};

/// Seeded random search over odd k in [1, min(51, smallest training fold)],
/// weighting and metric, scored by stratified cross-validated accuracy.
inline TuneResult tune(const Matrix& features, const std::vector<Label>& labels, int budget, int folds,
                       std::uint64_t seed) {
  require_shape(static_cast<std::size_t>(features.rows()) == labels.size(), "tune: features/labels length mismatch");
  if (budget < 1) throw ConfigError("tune: budget must be >= 1");
  if (folds < 2) throw ConfigError("tune: folds must be >= 2");
  const auto n_abnormal = static_cast<int>(std::count(labels.begin(), labels.end(), Label::abnormal));
  const auto n_normal = static_cast<int>(labels.size()) - n_abnormal;
  if (n_abnormal < folds || n_normal < folds)
    throw DataError("tune: cv-infeasible, need >= " + std::to_string(folds) + " samples per class (have " +
                    std::to_string(n_normal) + " normal, " + std::to_string(n_abnormal) + " abnormal)");

  std::mt19937_64 fold_rng(derive_seed(seed, {0xf01d}));
  const auto fold = stratified_folds(labels, folds, fold_rng);
  std::vector<int> fold_sizes(static_cast<std::size_t>(folds), 0);
  for (int f : fold) ++fold_sizes[static_cast<std::size_t>(f)];
  const int smallest_train =
      static_cast<int>(labels.size()) - *std::max_element(fold_sizes.begin(), fold_sizes.end());
  const int k_max = std::min(51, smallest_train);
  const int k_choices = (k_max + 1) / 2;  // 1, 3, ..., largest odd <= k_max

  TuneResult result;
  for (int trial = 0; trial < budget; ++trial) {
    std::mt19937_64 rng(derive_seed(seed, {0x7e57, static_cast<std::uint64_t>(trial)}));
    KnnHyper h;
    h.k = 2 * std::uniform_int_distribution<int>(0, k_choices - 1)(rng) + 1;
    h.weighting = std::uniform_int_distribution<int>(0, 1)(rng) ? KnnWeighting::inverse_distance : KnnWeighting::uniform;
    h.metric = std::uniform_int_distribution<int>(0, 1)(rng) ? KnnMetric::manhattan : KnnMetric::euclidean;
    const double acc = cross_validated_accuracy(features, labels, fold, folds, h);
    result.trials.push_back({h, acc});
    if (trial == 0 || acc > result.cv_accuracy) {
      result.best = h;
      result.cv_accuracy = acc;
    }
  }
  return result;
}

}  // namespace dmmeeg
