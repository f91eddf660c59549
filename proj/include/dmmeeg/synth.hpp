#pragma once

// Two-class linear-Gaussian state-space data and its exact evidence.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "dmmeeg/dataset.hpp"

namespace dmmeeg {

/// z_1 ~ N(0, initial_std^2 I); z_t = A z_{t-1} + process_std * e_t;
/// x_t = C z_t + observation_std * d_t.
struct LgssmSpec {
  Matrix transition;  // A, m x m
  Matrix emission;    // C, d x m
  double process_std = 1.0;
  double observation_std = 1.0;
  double initial_std = 1.0;

  Eigen::Index latent_dim() const { return transition.rows(); }
  Eigen::Index obs_dim() const { return emission.rows(); }

  void validate() const {
    require_shape(transition.rows() == transition.cols(), "LG-SSM transition must be square");
    require_shape(emission.cols() == transition.rows(), "LG-SSM emission columns must equal latent dim");
    if (!(process_std > 0.0) || !(observation_std > 0.0) || !(initial_std >= 0.0))
      throw DataError("LG-SSM noise scales must be positive");
    const double radius = transition.eigenvalues().cwiseAbs().maxCoeff();
    if (radius > 1.0 + 1e-12) throw DataError("LG-SSM transition is unstable (spectral radius > 1)");
  }
};

inline Matrix scaled_rotation(double angle, double scale) {
  Matrix a(2, 2);
  a << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return scale * a;
}

/// Default class pair: 2-D rotations by 0.3 and 0.9 rad scaled by 0.95, a shared
/// 4 x 2 emission and noise chosen so both classes have unit stationary latent variance.
inline std::pair<LgssmSpec, LgssmSpec> default_class_specs(double observation_std = 0.5) {
  constexpr double kScale = 0.95;
  Matrix c(4, 2);
  c << 1.0, 0.0,
       0.0, 1.0,
       0.6, 0.8,
       0.8, -0.6;
  LgssmSpec s0;
  s0.transition = scaled_rotation(0.3, kScale);
  s0.emission = c;
  s0.process_std = std::sqrt(1.0 - kScale * kScale);
  s0.observation_std = observation_std;
  s0.initial_std = 1.0;
  LgssmSpec s1 = s0;
  s1.transition = scaled_rotation(0.9, kScale);
  return {s0, s1};
}

/// Draws one T x d sequence.
inline Matrix sample_lgssm(const LgssmSpec& spec, Eigen::Index steps, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };
  const auto m = spec.latent_dim();
  const auto d = spec.obs_dim();
  Matrix x(steps, d);
  Vector z = spec.initial_std * draw(m);
  for (Eigen::Index t = 0; t < steps; ++t) {
    if (t > 0) z = spec.transition * z + spec.process_std * draw(m);
    x.row(t) = (spec.emission * z + spec.observation_std * draw(d)).transpose();
  }
  return x;
}

struct SynthDataset {
  std::vector<FeatureSequence> sequences;
  LgssmSpec class0;
  LgssmSpec class1;
  std::uint64_t seed = 0;
};

/// n_per_class sequences of each class, alternating class 0 / class 1.
/// Class 0 is labeled normal and class 1 abnormal.
inline SynthDataset generate(const LgssmSpec& spec0, const LgssmSpec& spec1, std::size_t n_per_class,
                             Eigen::Index steps, std::uint64_t seed, const std::string& id_prefix = "synth") {
  spec0.validate();
  spec1.validate();
  require_shape(spec0.latent_dim() == spec1.latent_dim() && spec0.obs_dim() == spec1.obs_dim(),
                "class specs differ in dimensions");
  if (steps < 2) throw DataError("synthetic sequences need T >= 2");
  if (n_per_class < 1) throw DataError("synthetic corpus needs at least one sequence per class");
  SynthDataset out;
  out.class0 = spec0;
  out.class1 = spec1;
  out.seed = seed;
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < spec0.obs_dim(); ++j) names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    const bool abnormal = (i % 2) == 1;
    std::mt19937_64 rng(derive_seed(seed, {i}));
    FeatureSequence fs;
    char id[32];
    std::snprintf(id, sizeof id, "-%06zu", i);
    fs.session_id = id_prefix + id;
    fs.label = abnormal ? Label::abnormal : Label::normal;
    fs.data = sample_lgssm(abnormal ? spec1 : spec0, steps, rng);
    fs.feature_names = names;
    out.sequences.push_back(std::move(fs));
  }
  return out;
}

/// Exact log p(x_1..x_T) by the Kalman predict/update recursion.
inline double kalman_loglik(const Matrix& x_seq, const LgssmSpec& spec) {
  require_shape(x_seq.cols() == spec.obs_dim(), "observation dim does not match LG-SSM");
  const auto m = spec.latent_dim();
  const auto d = spec.obs_dim();
  const Matrix& a = spec.transition;
  const Matrix& c = spec.emission;
  Vector mean = Vector::Zero(m);
  Matrix cov = spec.initial_std * spec.initial_std * Matrix::Identity(m, m);
  const Matrix obs_cov = spec.observation_std * spec.observation_std * Matrix::Identity(d, d);
  const Matrix proc_cov = spec.process_std * spec.process_std * Matrix::Identity(m, m);
  double ll = 0.0;
  for (Eigen::Index t = 0; t < x_seq.rows(); ++t) {
    if (t > 0) {
      mean = a * mean;
      cov = a * cov * a.transpose() + proc_cov;
      cov = 0.5 * (cov + cov.transpose()).eval();
    }
    Matrix s = c * cov * c.transpose() + obs_cov;
    s = 0.5 * (s + s.transpose()).eval();
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success)
      throw NumericalError("kalman_loglik: innovation covariance not positive definite at t=" +
                           std::to_string(t));
    const Vector innovation = x_seq.row(t).transpose() - c * mean;
    const Vector solved = llt.solve(innovation);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    ll += -0.5 * (static_cast<double>(d) * kLog2Pi + logdet + innovation.dot(solved));
    const Matrix gain = cov * c.transpose() * llt.solve(Matrix::Identity(d, d));
    mean += gain * innovation;
    cov = (Matrix::Identity(m, m) - gain * c) * cov;
    cov = 0.5 * (cov + cov.transpose()).eval();
  }
  return ll;
}

}  // namespace dmmeeg
