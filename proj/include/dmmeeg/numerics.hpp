#pragma once

// Small differentiable kernel used by the deep Markov model: dense layers,
// a gated recurrent unit, diagonal Gaussians, ADAM and finite-difference
// gradient checks. Batched routines store one sample per matrix column.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "dmmeeg/error.hpp"

namespace dmmeeg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

template <class T, class U>
concept is_a = std::same_as<std::remove_cvref_t<T>, U>;

// ---------------------------------------------------------------------------
// Scalar functions

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// ln(1 + e^v) without overflow for large |v|.
inline double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

/// Inverse of softplus for y > 0.
inline double softplus_inverse(double y) {
  if (!(y > 0.0)) throw NumericalError("softplus_inverse needs a positive argument");
  // ln(e^y - 1) = y + ln(1 - e^-y)
  return y + std::log(-std::expm1(-y));
}

template <class Derived>
Matrix softplus(const Eigen::MatrixBase<Derived>& m) {
  return m.unaryExpr([](double v) { return softplus(v); });
}

template <class Derived>
Matrix sigmoid(const Eigen::MatrixBase<Derived>& m) {
  return m.unaryExpr([](double v) { return sigmoid(v); });
}

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

// ---------------------------------------------------------------------------
// Dense layers and MLPs

enum class Activation { identity, relu, tanh, sigmoid, softplus };

inline Matrix activate(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::identity: return pre;
    case Activation::relu: return pre.cwiseMax(0.0);
    case Activation::tanh: return pre.array().tanh().matrix();
    case Activation::sigmoid: return sigmoid(pre);
    case Activation::softplus: return softplus(pre);
  }
  return pre;
}

/// d out / d pre, elementwise, given both pre-activation and output.
inline Matrix activation_derivative(Activation act, const Matrix& pre, const Matrix& out) {
  switch (act) {
    case Activation::identity: return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::relu: return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::tanh: return (1.0 - out.array().square()).matrix();
    case Activation::sigmoid: return (out.array() * (1.0 - out.array())).matrix();
    case Activation::softplus: return sigmoid(pre);
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;

  DenseLayer() = default;
  DenseLayer(Eigen::Index in, Eigen::Index out, Activation act)
      : weight(Matrix::Zero(out, in)), bias(Vector::Zero(out)), activation(act) {}

  Eigen::Index input_dim() const { return weight.cols(); }
  Eigen::Index output_dim() const { return weight.rows(); }
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  MlpParams() = default;
  /// Layers with sizes dims[0] -> dims[1] -> ... ; `hidden` on all but the last, `last` on the last.
  MlpParams(const std::vector<Eigen::Index>& dims, Activation hidden, Activation last) {
    if (dims.size() < 2) throw ShapeError("an MLP needs at least an input and an output size");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
      layers.emplace_back(dims[i], dims[i + 1], i + 2 == dims.size() ? last : hidden);
  }

  Eigen::Index input_dim() const { return layers.front().input_dim(); }
  Eigen::Index output_dim() const { return layers.back().output_dim(); }
};

struct DenseCache {
  Matrix input;
  Matrix pre;
  Matrix out;
};

inline Matrix dense_forward(const DenseLayer& layer, const Matrix& x, DenseCache* cache = nullptr) {
  require_shape(x.rows() == layer.input_dim(),
                "dense layer expects input dim " + std::to_string(layer.input_dim()) + ", got " +
                    std::to_string(x.rows()));
  Matrix pre = layer.weight * x;
  pre.colwise() += layer.bias;
  Matrix out = activate(layer.activation, pre);
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->out = out;
  }
  return out;
}

/// Accumulates parameter gradients into `grad` and returns d loss / d input.
inline Matrix dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& dout,
                             DenseLayer& grad) {
  Matrix dpre = dout.cwiseProduct(activation_derivative(layer.activation, cache.pre, cache.out));
  grad.weight.noalias() += dpre * cache.input.transpose();
  grad.bias += dpre.rowwise().sum();
  return layer.weight.transpose() * dpre;
}

using MlpCache = std::vector<DenseCache>;

inline Matrix mlp_forward(const MlpParams& p, const Matrix& x, MlpCache* cache = nullptr) {
  if (cache) cache->resize(p.layers.size());
  Matrix h = x;
  for (std::size_t i = 0; i < p.layers.size(); ++i)
    h = dense_forward(p.layers[i], h, cache ? &(*cache)[i] : nullptr);
  return h;
}

inline Vector mlp_forward(const MlpParams& p, const Vector& x) {
  return mlp_forward(p, Matrix(x)).col(0);
}

inline Matrix mlp_backward(const MlpParams& p, const MlpCache& cache, const Matrix& dout,
                           MlpParams& grad) {
  Matrix d = dout;
  for (std::size_t i = p.layers.size(); i-- > 0;)
    d = dense_backward(p.layers[i], cache[i], d, grad.layers[i]);
  return d;
}

// ---------------------------------------------------------------------------
// Gated recurrent unit

struct GruParams {
  Matrix w_update, u_update;  // H x D, H x H
  Vector b_update;
  Matrix w_reset, u_reset;
  Vector b_reset;
  Matrix w_candidate, u_candidate;
  Vector b_candidate;

  GruParams() = default;
  GruParams(Eigen::Index input_dim, Eigen::Index hidden_dim)
      : w_update(Matrix::Zero(hidden_dim, input_dim)),
        u_update(Matrix::Zero(hidden_dim, hidden_dim)),
        b_update(Vector::Zero(hidden_dim)),
        w_reset(Matrix::Zero(hidden_dim, input_dim)),
        u_reset(Matrix::Zero(hidden_dim, hidden_dim)),
        b_reset(Vector::Zero(hidden_dim)),
        w_candidate(Matrix::Zero(hidden_dim, input_dim)),
        u_candidate(Matrix::Zero(hidden_dim, hidden_dim)),
        b_candidate(Vector::Zero(hidden_dim)) {}

  Eigen::Index input_dim() const { return w_update.cols(); }
  Eigen::Index hidden_dim() const { return w_update.rows(); }
};

struct GruCache {
  Matrix x, h_prev, update, reset, candidate, reset_h;
};

inline Matrix gru_forward(const GruParams& p, const Matrix& x, const Matrix& h_prev,
                          GruCache* cache = nullptr) {
  require_shape(x.rows() == p.input_dim(), "gru input dim mismatch");
  require_shape(h_prev.rows() == p.hidden_dim() && h_prev.cols() == x.cols(),
                "gru hidden state dim mismatch");
  Matrix au = p.w_update * x + p.u_update * h_prev;
  au.colwise() += p.b_update;
  Matrix ar = p.w_reset * x + p.u_reset * h_prev;
  ar.colwise() += p.b_reset;
  Matrix update = sigmoid(au);
  Matrix reset = sigmoid(ar);
  Matrix reset_h = reset.cwiseProduct(h_prev);
  Matrix an = p.w_candidate * x + p.u_candidate * reset_h;
  an.colwise() += p.b_candidate;
  Matrix candidate = an.array().tanh().matrix();
  Matrix h = h_prev + update.cwiseProduct(candidate - h_prev);
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->update = std::move(update);
    cache->reset = std::move(reset);
    cache->candidate = std::move(candidate);
    cache->reset_h = std::move(reset_h);
  }
  return h;
}

/// One GRU step: u = s(Wu x + Uu h + bu), r = s(Wr x + Ur h + br),
/// c = tanh(Wc x + Uc (r*h) + bc), h' = (1-u)*h + u*c.
inline Vector gru_step(const GruParams& p, const Vector& x, const Vector& h_prev) {
  return gru_forward(p, Matrix(x), Matrix(h_prev)).col(0);
}

/// Returns d loss / d h_prev; parameter gradients accumulate into `grad`.
inline Matrix gru_backward(const GruParams& p, const GruCache& c, const Matrix& dh, GruParams& grad) {
  const auto& u = c.update.array();
  const auto& r = c.reset.array();
  const auto& n = c.candidate.array();
  Matrix dh_prev = (dh.array() * (1.0 - u)).matrix();

  Matrix dan = (dh.array() * u * (1.0 - n.square())).matrix();
  Matrix dau = (dh.array() * (n - c.h_prev.array()) * u * (1.0 - u)).matrix();

  grad.w_candidate.noalias() += dan * c.x.transpose();
  grad.u_candidate.noalias() += dan * c.reset_h.transpose();
  grad.b_candidate += dan.rowwise().sum();
  Matrix drh = p.u_candidate.transpose() * dan;
  dh_prev.array() += drh.array() * r;
  Matrix dar = (drh.array() * c.h_prev.array() * r * (1.0 - r)).matrix();

  grad.w_update.noalias() += dau * c.x.transpose();
  grad.u_update.noalias() += dau * c.h_prev.transpose();
  grad.b_update += dau.rowwise().sum();
  dh_prev.noalias() += p.u_update.transpose() * dau;

  grad.w_reset.noalias() += dar * c.x.transpose();
  grad.u_reset.noalias() += dar * c.h_prev.transpose();
  grad.b_reset += dar.rowwise().sum();
  dh_prev.noalias() += p.u_reset.transpose() * dar;
  return dh_prev;
}

/// Right-to-left pass over a batch of sequences. `xs[t]` is D x N; the
/// returned `hs[t]` is H x N and has consumed x_t .. x_{T-1}.
inline std::vector<Matrix> rnn_backward_pass(const GruParams& p, const std::vector<Matrix>& xs,
                                             const Vector& h_init,
                                             std::vector<GruCache>* caches = nullptr) {
  require_shape(!xs.empty(), "recurrent pass needs at least one timestep");
  require_shape(h_init.size() == p.hidden_dim(), "h_init dim mismatch");
  const auto steps = xs.size();
  std::vector<Matrix> hs(steps);
  if (caches) caches->resize(steps);
  Matrix h = h_init.replicate(1, xs.front().cols());
  for (std::size_t t = steps; t-- > 0;) {
    h = gru_forward(p, xs[t], h, caches ? &(*caches)[t] : nullptr);
    hs[t] = h;
  }
  return hs;
}

/// Row t of the result is the hidden state after consuming rows t..T-1 of x_seq.
inline Matrix run_rnn_backward(const GruParams& p, const Matrix& x_seq, const Vector& h_init) {
  require_shape(x_seq.rows() >= 1, "recurrent pass needs at least one timestep");
  require_shape(x_seq.cols() == p.input_dim(), "sequence feature dim does not match GRU input");
  std::vector<Matrix> xs(static_cast<std::size_t>(x_seq.rows()));
  for (Eigen::Index t = 0; t < x_seq.rows(); ++t) xs[static_cast<std::size_t>(t)] = x_seq.row(t).transpose();
  auto hs = rnn_backward_pass(p, xs, h_init);
  Matrix out(x_seq.rows(), p.hidden_dim());
  for (Eigen::Index t = 0; t < x_seq.rows(); ++t) out.row(t) = hs[static_cast<std::size_t>(t)].col(0).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Diagonal Gaussians

struct GaussianDiag {
  Vector mean;
  Vector std;

  GaussianDiag() = default;
  GaussianDiag(Vector m, Vector s) : mean(std::move(m)), std(std::move(s)) {
    require_shape(mean.size() == std.size(), "gaussian mean/std size mismatch");
    if (!(std.array() > 0.0).all()) throw NumericalError("gaussian std must be strictly positive");
  }
  Eigen::Index dim() const { return mean.size(); }
};

inline double gaussian_log_pdf(const GaussianDiag& g, const Vector& x) {
  require_shape(x.size() == g.dim(), "log-pdf argument dim mismatch");
  const auto z = ((x - g.mean).array() / g.std.array());
  return -0.5 * kLog2Pi * static_cast<double>(x.size()) - g.std.array().log().sum() -
         0.5 * z.square().sum();
}

inline double kl_diag_gaussians(const GaussianDiag& q, const GaussianDiag& p) {
  require_shape(q.dim() == p.dim(), "KL arguments differ in dimension");
  const auto qs = q.std.array();
  const auto ps = p.std.array();
  const auto diff = (q.mean - p.mean).array();
  return ((ps / qs).log() + (qs.square() + diff.square()) / (2.0 * ps.square()) - 0.5).sum();
}

inline Vector reparameterize(const GaussianDiag& g, const Vector& eps) {
  require_shape(eps.size() == g.dim(), "noise dim mismatch");
  return g.mean + g.std.cwiseProduct(eps);
}

// Batched forms (one sample per column) and their gradients.

/// Per-column log N(x; mean, std).
inline Eigen::RowVectorXd gaussian_log_pdf_cols(const Matrix& mean, const Matrix& std, const Matrix& x) {
  const auto z = (x - mean).array() / std.array();
  return (-0.5 * kLog2Pi - std.array().log() - 0.5 * z.square()).matrix().colwise().sum();
}

/// Adds d logpdf / d mean and d logpdf / d std, scaled by `weight`.
inline void gaussian_log_pdf_grad(const Matrix& mean, const Matrix& std, const Matrix& x, double weight,
                                  Matrix& dmean, Matrix& dstd) {
  const auto diff = (x - mean).array();
  const auto s = std.array();
  dmean.array() += weight * diff / s.square();
  dstd.array() += weight * (diff.square() / s.cube() - 1.0 / s);
}

inline Eigen::RowVectorXd kl_cols(const Matrix& qm, const Matrix& qs, const Matrix& pm, const Matrix& ps) {
  const auto d = (qm - pm).array();
  const auto q = qs.array();
  const auto p = ps.array();
  return ((p / q).log() + (q.square() + d.square()) / (2.0 * p.square()) - 0.5).matrix().colwise().sum();
}

/// Adds weight * gradients of KL(q || p) with respect to all four inputs.
inline void kl_grad(const Matrix& qm, const Matrix& qs, const Matrix& pm, const Matrix& ps, double weight,
                    Matrix& dqm, Matrix& dqs, Matrix& dpm, Matrix& dps) {
  const auto d = (qm - pm).array();
  const auto q = qs.array();
  const auto p = ps.array();
  const auto p2 = p.square();
  dqm.array() += weight * d / p2;
  dpm.array() -= weight * d / p2;
  dqs.array() += weight * (q / p2 - 1.0 / q);
  dps.array() += weight * (1.0 / p - (q.square() + d.square()) / (p2 * p));
}

// ---------------------------------------------------------------------------
// Parameter traversal. `visit_arrays(f, prefix, a, b, ...)` calls
// f(name, a_arr, b_arr, ...) for every array of same-shaped parameter sets.

template <class F, class First, class... Rest>
  requires is_a<First, DenseLayer>
void visit_arrays(F&& f, const std::string& prefix, First& first, Rest&... rest) {
  f(prefix + ".weight", first.weight, rest.weight...);
  f(prefix + ".bias", first.bias, rest.bias...);
}

template <class F, class First, class... Rest>
  requires is_a<First, MlpParams>
void visit_arrays(F&& f, const std::string& prefix, First& first, Rest&... rest) {
  for (std::size_t i = 0; i < first.layers.size(); ++i)
    visit_arrays(f, prefix + "." + std::to_string(i), first.layers[i], rest.layers[i]...);
}

template <class F, class First, class... Rest>
  requires is_a<First, GruParams>
void visit_arrays(F&& f, const std::string& prefix, First& first, Rest&... rest) {
  f(prefix + ".w_update", first.w_update, rest.w_update...);
  f(prefix + ".u_update", first.u_update, rest.u_update...);
  f(prefix + ".b_update", first.b_update, rest.b_update...);
  f(prefix + ".w_reset", first.w_reset, rest.w_reset...);
  f(prefix + ".u_reset", first.u_reset, rest.u_reset...);
  f(prefix + ".b_reset", first.b_reset, rest.b_reset...);
  f(prefix + ".w_candidate", first.w_candidate, rest.w_candidate...);
  f(prefix + ".u_candidate", first.u_candidate, rest.u_candidate...);
  f(prefix + ".b_candidate", first.b_candidate, rest.b_candidate...);
}

template <class P>
concept ParameterSet = requires(P& p) {
  visit_arrays([](const std::string&, auto&) {}, std::string{}, p);
};

template <ParameterSet P>
P zeros_like(const P& like) {
  P out = like;
  visit_arrays([](const std::string&, auto& a) { a.setZero(); }, std::string{}, out);
  return out;
}

template <ParameterSet P>
std::size_t parameter_count(const P& p) {
  std::size_t n = 0;
  visit_arrays([&](const std::string&, const auto& a) { n += static_cast<std::size_t>(a.size()); },
               std::string{}, p);
  return n;
}

template <ParameterSet P>
double global_norm(const P& p) {
  double s = 0.0;
  visit_arrays([&](const std::string&, const auto& a) { s += a.squaredNorm(); }, std::string{}, p);
  return std::sqrt(s);
}

/// Rescales `grads` so their joint L2 norm is at most max_norm. Returns the pre-clip norm.
template <ParameterSet P>
double clip_by_global_norm(P& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    visit_arrays([&](const std::string&, auto& a) { a *= scale; }, std::string{}, grads);
  }
  return norm;
}

/// Fills every array uniformly in +-1/sqrt(fan_in), fan_in = columns for
/// matrices; a vector takes the fan-in of the matrix visited just before it.
template <ParameterSet P>
void init_fan_in_uniform(P& p, std::mt19937_64& rng) {
  Eigen::Index last_fan_in = 1;
  visit_arrays(
      [&](const std::string&, auto& a) {
        Eigen::Index fan_in = last_fan_in;
        if constexpr (!is_a<decltype(a), Vector>) fan_in = last_fan_in = a.cols();
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = bound * dist(rng);
      },
      std::string{}, p);
}

// ---------------------------------------------------------------------------
// ADAM

template <ParameterSet P>
struct AdamState {
  P m;
  P v;
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(const P& like, double lr) : m(zeros_like(like)), v(zeros_like(like)), learning_rate(lr) {}
};

/// One ADAM update of `params` (descending along `grads`).
template <ParameterSet P>
void adam_step(AdamState<P>& state, P& params, const P& grads) {
  visit_arrays(
      [&](const std::string& name, const auto& g, const auto& p) {
        require_shape(g.rows() == p.rows() && g.cols() == p.cols(), "gradient shape mismatch for " + name);
        if (!g.allFinite()) throw NumericalError("optimizer: non-finite gradient in " + name);
      },
      std::string{}, grads, params);
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  visit_arrays(
      [&](const std::string&, auto& p, const auto& g, auto& m, auto& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        p.array() -= state.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
      },
      std::string{}, params, grads, state.m, state.v);
}

// ---------------------------------------------------------------------------
// Gradient verification

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_array;
  std::size_t coordinates_checked = 0;
};

/// Compares `analytic` against central differences of `f` at `params`.
/// Arrays with more than `max_coords_per_array` entries are sampled.
template <ParameterSet P, class F>
GradCheckReport grad_check(F&& f, P params, const P& analytic, double h = 1e-4,
                           std::size_t max_coords_per_array = 0, std::uint64_t seed = 0) {
  GradCheckReport report;
  std::mt19937_64 rng(seed);
  auto evaluate = [&](const std::string& name) {
    const double v = f(params);
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite evaluation perturbing " + name);
    return v;
  };
  visit_arrays(
      [&](const std::string& name, auto& p, const auto& a) {
        std::vector<Eigen::Index> coords(static_cast<std::size_t>(p.size()));
        for (Eigen::Index i = 0; i < p.size(); ++i) coords[static_cast<std::size_t>(i)] = i;
        if (max_coords_per_array > 0 && coords.size() > max_coords_per_array) {
          std::shuffle(coords.begin(), coords.end(), rng);
          coords.resize(max_coords_per_array);
        }
        for (Eigen::Index i : coords) {
          const double saved = p.data()[i];
          p.data()[i] = saved + h;
          const double up = evaluate(name);
          p.data()[i] = saved - h;
          const double down = evaluate(name);
          p.data()[i] = saved;
          const double numeric = (up - down) / (2.0 * h);
          const double exact = a.data()[i];
          const double rel = std::abs(exact - numeric) / std::max(1e-8, std::abs(exact) + std::abs(numeric));
          report.coordinates_checked += 1;
          if (rel > report.max_relative_error) {
            report.max_relative_error = rel;
            report.worst_array = name + "[" + std::to_string(i) + "]";
          }
        }
      },
      std::string{}, params, analytic);
  return report;
}

}  // namespace dmmeeg
