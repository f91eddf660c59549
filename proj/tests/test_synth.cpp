#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "dmmeeg/synth.hpp"
#include "oracles.hpp"

using namespace dmmeeg;

namespace {

LgssmSpec scalar_spec(double a, double c, double q, double r, double q0) {
  LgssmSpec s;
  s.transition = Matrix::Constant(1, 1, a);
  s.emission = Matrix::Constant(1, 1, c);
  s.process_std = q;
  s.observation_std = r;
  s.initial_std = q0;
  return s;
}

double lag1_autocorrelation(const Matrix& x) {
  double num = 0, den = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Vector col = x.col(j).array() - x.col(j).mean();
    for (Eigen::Index t = 0; t + 1 < x.rows(); ++t) num += col[t] * col[t + 1];
    den += col.squaredNorm();
  }
  return num / den;
}

}  // namespace

TEST(Kalman, SingleStepClosedForm) {
  const auto s = scalar_spec(1, 1, std::sqrt(0.5), std::sqrt(0.5), std::sqrt(0.5));
  EXPECT_NEAR(kalman_loglik(Matrix::Zero(1, 1), s), -0.5 * std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(kalman_loglik(Matrix::Zero(1, 1), s), -0.918939, 1e-6);
}

TEST(Kalman, DoublingObservationNoise) {
  const auto a = scalar_spec(1, 1, 1, 0.7, 0), b = scalar_spec(1, 1, 1, 1.4, 0);
  const Matrix x = Matrix::Zero(1, 1);
  EXPECT_NEAR(kalman_loglik(x, b) - kalman_loglik(x, a), -std::log(2.0), 1e-12);
}

TEST(Kalman, MatchesJointGaussian) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + trial % 3, d = 1 + trial % 2, T = 1 + trial % 5;
    LgssmSpec s;
    s.transition = Matrix(m, m);
    for (Eigen::Index i = 0; i < s.transition.size(); ++i) s.transition.data()[i] = n01(rng);
    s.transition /= 1.1 * s.transition.eigenvalues().cwiseAbs().maxCoeff();
    s.emission = Matrix(d, m);
    for (Eigen::Index i = 0; i < s.emission.size(); ++i) s.emission.data()[i] = n01(rng);
    s.process_std = 0.3 + 0.1 * (trial % 4);
    s.observation_std = 0.4 + 0.05 * trial;
    s.initial_std = 0.5 + 0.1 * (trial % 3);
    std::mt19937_64 draw(static_cast<std::uint64_t>(trial));
    const Matrix x = sample_lgssm(s, T, draw);
    EXPECT_NEAR(kalman_loglik(x, s), oracle::joint_gaussian_loglik(x, s), 1e-8) << "trial " << trial;
  }
}

TEST(Kalman, TrueSpecBeatsMismatched) {
  const auto [s0, s1] = default_class_specs();
  std::mt19937_64 rng(3);
  double right = 0, wrong = 0;
  for (int i = 0; i < 50; ++i) {
    const Matrix x = sample_lgssm(s0, 60, rng);
    right += kalman_loglik(x, s0);
    wrong += kalman_loglik(x, s1);
  }
  EXPECT_GT(right, wrong);
}

TEST(Kalman, DimensionMismatch) {
  const auto [s0, s1] = default_class_specs();
  EXPECT_THROW(kalman_loglik(Matrix::Zero(3, 2), s0), ShapeError);
}

TEST(Generate, ReproducibleAndAlternating) {
  const auto [s0, s1] = default_class_specs();
  const auto a = generate(s0, s1, 5, 20, 99, "p");
  const auto b = generate(s0, s1, 5, 20, 99, "p");
  ASSERT_EQ(a.sequences.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(a.sequences[i].data, b.sequences[i].data);
    EXPECT_EQ(a.sequences[i].session_id, b.sequences[i].session_id);
    EXPECT_EQ(*a.sequences[i].label, i % 2 ? Label::abnormal : Label::normal);
    EXPECT_EQ(a.sequences[i].steps(), 20);
    EXPECT_EQ(a.sequences[i].dim(), 4);
  }
  EXPECT_EQ(a.sequences[3].session_id, "p-000003");
  EXPECT_NE(generate(s0, s1, 5, 20, 100).sequences[0].data, a.sequences[0].data);
}

TEST(Generate, NoiselessIdentityIsConstant) {
  auto s = scalar_spec(1, 1, 1e-300, 1e-300, 1);
  const auto ds = generate(s, s, 3, 10, 5);
  for (const auto& fs : ds.sequences) {
    EXPECT_NE(fs.data(0, 0), 0.0);
    for (Eigen::Index t = 1; t < fs.steps(); ++t) EXPECT_EQ(fs.data(t, 0), fs.data(0, 0));
  }
}

TEST(Generate, ClassesDifferInLagOneAutocorrelation) {
  const auto [s0, s1] = default_class_specs();
  const auto ds = generate(s0, s1, 100, 60, 7);
  double ac[2] = {0, 0};
  for (const auto& fs : ds.sequences) ac[static_cast<int>(*fs.label)] += lag1_autocorrelation(fs.data) / 100.0;
  EXPECT_GT(std::abs(ac[0] - ac[1]), 0.1) << ac[0] << " vs " << ac[1];
}

TEST(Generate, BayesOracleAccuracy) {
  const auto [s0, s1] = default_class_specs();
  const auto ds = generate(s0, s1, 200, 60, 8);
  int correct = 0;
  for (const auto& fs : ds.sequences) {
    const bool say_abnormal = kalman_loglik(fs.data, s1) > kalman_loglik(fs.data, s0);
    correct += say_abnormal == (*fs.label == Label::abnormal);
  }
  EXPECT_GE(correct / 400.0, 0.95);
}

TEST(Generate, RejectsBadSpecs) {
  auto [s0, s1] = default_class_specs();
  EXPECT_THROW(generate(s0, scalar_spec(1, 1, 1, 1, 1), 2, 10, 1), ShapeError);
  s1.transition *= 1.2;
  EXPECT_THROW(generate(s0, s1, 2, 10, 1), DataError);
  EXPECT_THROW(generate(s0, s0, 2, 1, 1), DataError);
}

TEST(DefaultSpecs, UnitStationaryVariance) {
  const auto [s0, s1] = default_class_specs();
  for (const auto& s : {s0, s1}) {
    Matrix v = Matrix::Identity(2, 2);
    for (int i = 0; i < 2000; ++i) v = s.transition * v * s.transition.transpose() + s.process_std * s.process_std * Matrix::Identity(2, 2);
    EXPECT_LT((v - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
  }
}
