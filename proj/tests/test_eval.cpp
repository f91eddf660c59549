#include <gtest/gtest.h>

#include <random>

#include "dmmeeg/eval.hpp"
#include "oracles.hpp"

using namespace dmmeeg;

namespace {

const Label N = Label::normal;
const Label A = Label::abnormal;

std::vector<Label> corpus_counts() {
  std::vector<Label> y;
  for (int i = 0; i < 1379 + 1361; ++i) y.push_back(i < 1379 ? N : A);
  std::mt19937_64 rng(1);
  std::shuffle(y.begin(), y.end(), rng);
  return y;
}

std::pair<std::size_t, std::size_t> counts(const std::vector<Label>& y, const std::vector<std::size_t>& idx) {
  std::size_t n = 0, a = 0;
  for (auto i : idx) (y[i] == A ? a : n)++;
  return {n, a};
}

}  // namespace

TEST(Stratified, FiveFromCorpusCounts) {
  const auto y = corpus_counts();
  const auto idx = stratified_subsample_indices(y, 5, 3);
  EXPECT_EQ(counts(y, idx), std::make_pair(std::size_t{3}, std::size_t{2}));
  EXPECT_EQ(oracle::apportion(1379, 1361, 5), std::make_pair(std::size_t{3}, std::size_t{2}));
}

TEST(Stratified, MatchesApportionmentEverywhere) {
  const auto y = corpus_counts();
  for (std::size_t n : {2, 3, 7, 14, 27, 55, 137, 274, 1001, 2739}) {
    const auto idx = stratified_subsample_indices(y, n, n);
    EXPECT_EQ(idx.size(), n);
    EXPECT_EQ(counts(y, idx), oracle::apportion(1379, 1361, n)) << n;
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
  }
}

TEST(Stratified, FullSetIsIdentity) {
  const std::vector<std::string> ids{"a", "b", "c", "d", "e"};
  EXPECT_EQ(stratified_subsample(ids, {N, A, A, N, N}, 5, 4), ids);
}

TEST(Stratified, TwoTakesOnePerClass) {
  std::vector<Label> y(100, N);
  y[42] = A;
  const auto idx = stratified_subsample_indices(y, 2, 8);
  EXPECT_EQ(counts(y, idx), std::make_pair(std::size_t{1}, std::size_t{1}));
  EXPECT_NE(std::find(idx.begin(), idx.end(), 42u), idx.end());
}

TEST(Stratified, Errors) {
  EXPECT_THROW(stratified_subsample_indices({N, N, N}, 2, 1), DataError);
  EXPECT_THROW(stratified_subsample_indices({N, A, N}, 1, 1), DataError);
  EXPECT_THROW(stratified_subsample_indices({N, A, N}, 4, 1), DataError);
}

TEST(Stratified, SeedDeterminesSample) {
  const auto y = corpus_counts();
  EXPECT_EQ(stratified_subsample_indices(y, 20, 5), stratified_subsample_indices(y, 20, 5));
  EXPECT_NE(stratified_subsample_indices(y, 20, 5), stratified_subsample_indices(y, 20, 6));
}

TEST(Accuracy, Counting) {
  EXPECT_EQ(accuracy({N, A, A, N}, {N, A, A, N}), 1.0);
  EXPECT_EQ(accuracy({N, A}, {A, N}), 0.0);
  EXPECT_EQ(accuracy({N, A, A, N}, {N, A, N, N}), 0.75);
  EXPECT_THROW(accuracy({N}, {N, A}), ShapeError);
}

TEST(Auroc, WorkedExamples) {
  EXPECT_EQ(roc_auroc({A, A, N, N}, {.9, .8, .7, .6}).auroc, 1.0);
  EXPECT_EQ(roc_auroc({A, N, A, N}, {.9, .8, .7, .6}).auroc, 0.75);
  EXPECT_EQ(roc_auroc({A, N, A, N}, {.5, .5, .5, .5}).auroc, 0.5);
  EXPECT_THROW(roc_auroc({A, A}, {.1, .2}), DataError);
}

TEST(Auroc, CurveEndpoints) {
  const auto roc = roc_auroc({A, N, A, N, N}, {.9, .8, .8, .1, .1});
  EXPECT_EQ(roc.points.front().fpr, 0.0);
  EXPECT_EQ(roc.points.back().fpr, 1.0);
  EXPECT_EQ(roc.points.back().tpr, 1.0);
  EXPECT_EQ(roc.points.size(), 4u);
}

TEST(Auroc, MatchesPairCounting) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 200)(rng);
    std::vector<Label> y(static_cast<std::size_t>(n));
    std::vector<double> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = std::bernoulli_distribution(0.5)(rng) ? A : N;
      s[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, 10)(rng) / 10.0;
    }
    y[0] = A;
    y[1] = N;
    EXPECT_NEAR(roc_auroc(y, s).auroc, oracle::pair_count_auroc(y, s), 1e-12);
  }
}

namespace {

std::vector<FeatureSequence> blobs(int n, double gap, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<FeatureSequence> out;
  for (int i = 0; i < n; ++i) {
    FeatureSequence fs;
    fs.session_id = "b" + std::to_string(i);
    fs.label = i % 2 ? A : N;
    fs.data.resize(4, 2);
    for (Eigen::Index j = 0; j < fs.data.size(); ++j) fs.data.data()[j] = n01(rng) + (i % 2 ? gap : 0.0);
    out.push_back(fs);
  }
  return out;
}

ExperimentConfig small_cfg() {
  ExperimentConfig cfg;
  cfg.labeled_sizes = {5, 10, 20};
  cfg.runs = 3;
  cfg.seed = 12;
  cfg.feature_space = FeatureSpace::input;
  cfg.tune_budget = 8;
  return cfg;
}

}  // namespace

TEST(Experiment, RowCountAndDeterminism) {
  const auto train = blobs(60, 1.0, 1), test = blobs(40, 1.0, 2);
  const auto cfg = small_cfg();
  const auto a = run_experiment(cfg, nullptr, train, test);
  const auto b = run_experiment(cfg, nullptr, train, test);
  ASSERT_EQ(a.rows.size(), 9u);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].auroc, b.rows[i].auroc);
    EXPECT_EQ(a.rows[i].accuracy, b.rows[i].accuracy);
    EXPECT_EQ(a.rows[i].hyper, b.rows[i].hyper);
  }
}

TEST(Experiment, AllSentinelUsesWholeSet) {
  auto cfg = small_cfg();
  cfg.labeled_sizes = {5, kAllLabeled};
  cfg.runs = 1;
  const auto r = run_experiment(cfg, nullptr, blobs(30, 1.0, 1), blobs(10, 1.0, 2));
  EXPECT_EQ(r.rows.back().labeled_size, 30u);
}

TEST(Experiment, LatentNeedsParams) {
  auto cfg = small_cfg();
  cfg.feature_space = FeatureSpace::latent;
  EXPECT_THROW(run_experiment(cfg, nullptr, blobs(30, 1.0, 1), blobs(10, 1.0, 2)), ConfigError);
}

TEST(Experiment, SummaryRecomputesFromRows) {
  const auto r = run_experiment(small_cfg(), nullptr, blobs(60, 1.0, 3), blobs(40, 1.0, 4));
  const auto summary = summarize(r);
  ASSERT_EQ(summary.size(), 3u);
  for (const auto& s : summary) {
    std::vector<double> v;
    for (const auto& row : r.rows)
      if (row.labeled_size == s.labeled_size) v.push_back(row.auroc);
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_DOUBLE_EQ(s.auroc_mean, mean);
    EXPECT_DOUBLE_EQ(s.auroc_std, std::sqrt(ss / static_cast<double>(v.size() - 1)));
  }
}

TEST(Experiment, ConfigValidation) {
  ExperimentConfig cfg;
  cfg.labeled_sizes = {10, 5};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.labeled_sizes = {1};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Pca, CollinearPoints) {
  Matrix x(5, 2);
  for (int i = 0; i < 5; ++i) x.row(i) << i, 2.0 * i + 1;
  const auto p = pca_project(x);
  EXPECT_NEAR(p.explained[0], 1.0, 1e-12);
  EXPECT_NEAR(p.explained[1], 0.0, 1e-12);
}

TEST(Pca, RotationPreservesExplainedVariance) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  Matrix x(50, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n01(rng);
  x.col(0) *= 3;
  Matrix q = Eigen::HouseholderQR<Matrix>(Matrix::Random(3, 3)).householderQ();
  const auto a = pca_project(x), b = pca_project(x * q);
  EXPECT_LT((a.explained - b.explained).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_GE(a.explained[0], a.explained[1]);
  const Matrix rotated = q.transpose() * a.components;
  for (int c = 0; c < 2; ++c) EXPECT_NEAR(std::abs(rotated.col(c).dot(b.components.col(c))), 1.0, 1e-9);
}

TEST(Pca, TwoPointsSymmetric) {
  Matrix x(2, 3);
  x << 1, 2, 3, 4, 0, -1;
  const auto p = pca_project(x);
  EXPECT_NEAR(p.coords(0, 0), -p.coords(1, 0), 1e-12);
  EXPECT_GT(std::abs(p.coords(0, 0)), 0.0);
}

TEST(Pca, DegenerateInputGivesZeros) {
  const auto p = pca_project(Matrix::Constant(4, 3, 2.0));
  EXPECT_TRUE(p.coords.isZero(0));
  EXPECT_TRUE(p.explained.isZero(0));
}

TEST(Pca, SignConvention) {
  Matrix x(4, 2);
  x << 1, 0, -1, 0, 3, 0.1, -3, -0.1;
  const auto p = pca_project(x);
  Eigen::Index arg;
  p.components.col(0).cwiseAbs().maxCoeff(&arg);
  EXPECT_GT(p.components(arg, 0), 0.0);
}

TEST(Silhouette, SeparatedAndMixed) {
  Matrix far(4, 1);
  far << 0, 0.1, 100, 100.1;
  EXPECT_NEAR(silhouette(far, {N, N, A, A}), 1.0, 1e-2);
  Matrix same(4, 1);
  same << 0, 0, 0, 0;
  EXPECT_EQ(silhouette(same, {N, A, N, A}), 0.0);
}

TEST(Silhouette, HandComputed) {
  Matrix x(3, 1);
  x << 0, 1, 3;
  // point 0: a=1, b=3; point 1: a=1, b=2; point 2 is a singleton -> 0
  const double expect = ((3.0 - 1.0) / 3.0 + (2.0 - 1.0) / 2.0) / 3.0;
  EXPECT_NEAR(silhouette(x, {N, N, A}), expect, 1e-15);
}
