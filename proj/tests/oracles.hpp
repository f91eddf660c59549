#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Deliberately naive.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "dmmeeg/classify.hpp"
#include "dmmeeg/synth.hpp"

namespace oracle {

using dmmeeg::Label;
using dmmeeg::Matrix;
using dmmeeg::Vector;

/// (concordant + ties / 2) / (P * N) over every positive/negative pair.
inline double pair_count_auroc(const std::vector<Label>& y, const std::vector<double>& s) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[i] != Label::abnormal || y[j] != Label::normal) continue;
      pairs += 1;
      if (s[i] > s[j]) num += 1;
      else if (s[i] == s[j]) num += 0.5;
    }
  return num / pairs;
}

/// Full stable sort by (distance, index).
inline std::vector<dmmeeg::Neighbor> brute_kneighbors(const dmmeeg::KnnModel& m, const Vector& q, int k) {
  std::vector<dmmeeg::Neighbor> all;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double d = 0;
    for (Eigen::Index c = 0; c < m.dim(); ++c) {
      const double diff = m.features(i, c) - q[c];
      d += m.hyper.metric == dmmeeg::KnnMetric::manhattan ? std::abs(diff) : diff * diff;
    }
    if (m.hyper.metric == dmmeeg::KnnMetric::euclidean) d = std::sqrt(d);
    all.push_back({i, d});
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.distance < b.distance; });
  all.resize(static_cast<std::size_t>(k));
  return all;
}

/// Largest-remainder class counts for n draws, each class at least one.
inline std::pair<std::size_t, std::size_t> apportion(std::size_t n_normal, std::size_t n_abnormal, std::size_t n) {
  const double total = static_cast<double>(n_normal + n_abnormal);
  const double e0 = static_cast<double>(n) * static_cast<double>(n_normal) / total;
  const double e1 = static_cast<double>(n) * static_cast<double>(n_abnormal) / total;
  std::size_t q0 = static_cast<std::size_t>(e0), q1 = static_cast<std::size_t>(e1);
  if (q0 + q1 < n) {
    if (e1 - static_cast<double>(q1) > e0 - static_cast<double>(q0)) ++q1;
    else ++q0;
  }
  if (q0 == 0) q0 = 1, --q1;
  if (q1 == 0) q1 = 1, --q0;
  return {q0, q1};
}

/// log N(x_{1:T}; 0, Sigma) where Sigma is the full joint covariance of the
/// stacked observations of a linear-Gaussian state-space model.
inline double joint_gaussian_loglik(const Matrix& x, const dmmeeg::LgssmSpec& spec) {
  const auto T = x.rows(), d = x.cols(), m = spec.transition.rows();
  // Cov(z_s, z_t) = A^(t-s) Var(z_s) for t >= s
  std::vector<Matrix> var(static_cast<std::size_t>(T));
  var[0] = spec.initial_std * spec.initial_std * Matrix::Identity(m, m);
  for (Eigen::Index t = 1; t < T; ++t)
    var[static_cast<std::size_t>(t)] = spec.transition * var[static_cast<std::size_t>(t - 1)] * spec.transition.transpose() +
                                       spec.process_std * spec.process_std * Matrix::Identity(m, m);
  Matrix sigma = Matrix::Zero(T * d, T * d);
  for (Eigen::Index s = 0; s < T; ++s)
    for (Eigen::Index t = s; t < T; ++t) {
      Matrix power = Matrix::Identity(m, m);
      for (Eigen::Index i = s; i < t; ++i) power = spec.transition * power;
      const Matrix zz = power * var[static_cast<std::size_t>(s)];
      Matrix block = spec.emission * zz * spec.emission.transpose();
      if (s == t) block += spec.observation_std * spec.observation_std * Matrix::Identity(d, d);
      sigma.block(t * d, s * d, d, d) = block;
      sigma.block(s * d, t * d, d, d) = block.transpose();
    }
  Vector flat(T * d);
  for (Eigen::Index t = 0; t < T; ++t) flat.segment(t * d, d) = x.row(t).transpose();
  const Eigen::LLT<Matrix> llt(sigma);
  const Vector w = llt.matrixL().solve(flat);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(T * d) * std::log(2 * std::numbers::pi) + logdet + w.squaredNorm());
}

}  // namespace oracle
