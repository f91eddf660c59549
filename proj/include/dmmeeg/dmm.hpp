#pragma once

// Deep Markov model: gated transition, MLP emission, backward-GRU guide
// with a combiner, the reparameterized ELBO with hand-derived gradients,
// the SVI training loop and deterministic latent extraction.

#include <chrono>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dmmeeg/dataset.hpp"
#include "dmmeeg/numerics.hpp"
#include "dmmeeg/synth.hpp"

namespace dmmeeg {

enum class LatentAggregation { mean, last, concat };

struct DmmConfig {
  Eigen::Index x_dim = 0;  // 0: take from the data
  Eigen::Index z_dim = 16;
  Eigen::Index transition_hidden = 64;
  Eigen::Index emission_hidden = 64;
  Eigen::Index rnn_hidden = 128;
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 0.001;
  int particles = 1;
  int kl_anneal_epochs = 10;
  double kl_floor = 0.2;
  std::uint64_t seed = 0;
  double std_floor = 1e-4;
  double clip_norm = 10.0;
  LatentAggregation aggregation = LatentAggregation::mean;

  void validate() const {
    if (x_dim < 1 || z_dim < 1 || transition_hidden < 1 || emission_hidden < 1 || rnn_hidden < 1)
      throw ConfigError("all DMM dimensions must be >= 1");
    if (epochs < 0 || batch_size < 1 || particles < 1 || kl_anneal_epochs < 0)
      throw ConfigError("epochs >= 0, batch_size >= 1, particles >= 1, kl_anneal_epochs >= 0 required");
    if (!(kl_floor >= 0.0 && kl_floor <= 1.0)) throw ConfigError("kl_floor must lie in [0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(std_floor > 0.0)) throw ConfigError("std_floor must be positive");
  }
};

struct DmmParams {
  // generative model
  MlpParams transition_gate;      // z -> hidden (relu) -> z (sigmoid)
  MlpParams transition_proposal;  // z -> hidden (relu) -> z
  DenseLayer transition_linear;   // z -> z
  DenseLayer transition_std;      // relu(proposal) -> z, then softplus
  MlpParams emission_trunk;       // z -> hidden (relu) -> hidden (relu)
  DenseLayer emission_mean;
  DenseLayer emission_std;
  // guide
  GruParams rnn;
  Vector h_init;
  DenseLayer combiner_latent;  // z -> rnn_hidden (tanh)
  DenseLayer combiner_mean;
  DenseLayer combiner_std;
  Vector z0;

  double std_floor = 1e-4;

  Eigen::Index z_dim() const { return z0.size(); }
  Eigen::Index x_dim() const { return emission_mean.output_dim(); }
  Eigen::Index rnn_hidden() const { return h_init.size(); }
};

template <class F, class First, class... Rest>
  requires is_a<First, DmmParams>
void visit_arrays(F&& f, const std::string& prefix, First& first, Rest&... rest) {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  visit_arrays(f, p + "transition.gate", first.transition_gate, rest.transition_gate...);
  visit_arrays(f, p + "transition.proposal", first.transition_proposal, rest.transition_proposal...);
  visit_arrays(f, p + "transition.linear", first.transition_linear, rest.transition_linear...);
  visit_arrays(f, p + "transition.std", first.transition_std, rest.transition_std...);
  visit_arrays(f, p + "emission.trunk", first.emission_trunk, rest.emission_trunk...);
  visit_arrays(f, p + "emission.mean", first.emission_mean, rest.emission_mean...);
  visit_arrays(f, p + "emission.std", first.emission_std, rest.emission_std...);
  visit_arrays(f, p + "guide.rnn", first.rnn, rest.rnn...);
  f(p + "guide.h_init", first.h_init, rest.h_init...);
  visit_arrays(f, p + "guide.combiner.latent", first.combiner_latent, rest.combiner_latent...);
  visit_arrays(f, p + "guide.combiner.mean", first.combiner_mean, rest.combiner_mean...);
  visit_arrays(f, p + "guide.combiner.std", first.combiner_std, rest.combiner_std...);
  f(p + "z0", first.z0, rest.z0...);
}

/// Zero-valued parameters with the shapes implied by `cfg`.
inline DmmParams make_dmm_params(const DmmConfig& cfg) {
  cfg.validate();
  const auto z = cfg.z_dim, x = cfg.x_dim;
  DmmParams p;
  p.transition_gate = MlpParams({z, cfg.transition_hidden, z}, Activation::relu, Activation::sigmoid);
  p.transition_proposal = MlpParams({z, cfg.transition_hidden, z}, Activation::relu, Activation::identity);
  p.transition_linear = DenseLayer(z, z, Activation::identity);
  p.transition_std = DenseLayer(z, z, Activation::identity);
  p.emission_trunk = MlpParams({z, cfg.emission_hidden, cfg.emission_hidden}, Activation::relu, Activation::relu);
  p.emission_mean = DenseLayer(cfg.emission_hidden, x, Activation::identity);
  p.emission_std = DenseLayer(cfg.emission_hidden, x, Activation::identity);
  p.rnn = GruParams(x, cfg.rnn_hidden);
  p.h_init = Vector::Zero(cfg.rnn_hidden);
  p.combiner_latent = DenseLayer(z, cfg.rnn_hidden, Activation::tanh);
  p.combiner_mean = DenseLayer(cfg.rnn_hidden, z, Activation::identity);
  p.combiner_std = DenseLayer(cfg.rnn_hidden, z, Activation::identity);
  p.z0 = Vector::Zero(z);
  p.std_floor = cfg.std_floor;
  return p;
}

/// Seeded fan-in uniform initialization; z0 and h_init start at zero.
inline DmmParams init_dmm_params(const DmmConfig& cfg) {
  DmmParams p = make_dmm_params(cfg);
  std::mt19937_64 rng(derive_seed(cfg.seed, {0x1417}));
  init_fan_in_uniform(p, rng);
  p.z0.setZero();
  p.h_init.setZero();
  return p;
}

// ---------------------------------------------------------------------------
// Batched building blocks (one sample per column)

struct TransitionCache {
  MlpCache gate, proposal;
  DenseCache linear, std;
  Matrix g, proposal_out, linear_out, mean, stddev;
};

inline void transition_forward(const DmmParams& p, const Matrix& z_prev, TransitionCache& c) {
  require_shape(z_prev.rows() == p.z_dim(), "transition input must have z_dim rows");
  c.g = mlp_forward(p.transition_gate, z_prev, &c.gate);
  c.proposal_out = mlp_forward(p.transition_proposal, z_prev, &c.proposal);
  c.linear_out = dense_forward(p.transition_linear, z_prev, &c.linear);
  c.mean = c.linear_out + c.g.cwiseProduct(c.proposal_out - c.linear_out);
  const Matrix pre = dense_forward(p.transition_std, c.proposal_out.cwiseMax(0.0), &c.std);
  c.stddev = softplus(pre).array() + p.std_floor;
}

/// Returns d / d z_prev given gradients on the transition mean and std.
inline Matrix transition_backward(const DmmParams& p, const TransitionCache& c, const Matrix& dmean,
                                  const Matrix& dstd, DmmParams& g) {
  const Matrix dstd_pre = dstd.cwiseProduct(sigmoid(c.std.pre));
  Matrix dproposal = dense_backward(p.transition_std, c.std, dstd_pre, g.transition_std);
  dproposal.array() *= (c.proposal_out.array() > 0.0).cast<double>();
  dproposal += dmean.cwiseProduct(c.g);
  const Matrix dlinear = dmean.cwiseProduct((1.0 - c.g.array()).matrix());
  const Matrix dgate = dmean.cwiseProduct(c.proposal_out - c.linear_out);
  Matrix dz = mlp_backward(p.transition_gate, c.gate, dgate, g.transition_gate);
  dz += mlp_backward(p.transition_proposal, c.proposal, dproposal, g.transition_proposal);
  dz += dense_backward(p.transition_linear, c.linear, dlinear, g.transition_linear);
  return dz;
}

struct EmissionCache {
  MlpCache trunk;
  DenseCache mean_head, std_head;
  Matrix mean, stddev;
};

inline void emission_forward(const DmmParams& p, const Matrix& z, EmissionCache& c) {
  require_shape(z.rows() == p.z_dim(), "emission input must have z_dim rows");
  const Matrix trunk = mlp_forward(p.emission_trunk, z, &c.trunk);
  c.mean = dense_forward(p.emission_mean, trunk, &c.mean_head);
  c.stddev = softplus(dense_forward(p.emission_std, trunk, &c.std_head)).array() + p.std_floor;
}

inline Matrix emission_backward(const DmmParams& p, const EmissionCache& c, const Matrix& dmean,
                                const Matrix& dstd, DmmParams& g) {
  Matrix dtrunk = dense_backward(p.emission_mean, c.mean_head, dmean, g.emission_mean);
  dtrunk += dense_backward(p.emission_std, c.std_head, dstd.cwiseProduct(sigmoid(c.std_head.pre)), g.emission_std);
  return mlp_backward(p.emission_trunk, c.trunk, dtrunk, g.emission_trunk);
}

struct CombinerCache {
  DenseCache latent, mean_head, std_head;
  Matrix mean, stddev;
};

inline void combiner_forward(const DmmParams& p, const Matrix& z_prev, const Matrix& h_rnn, CombinerCache& c) {
  require_shape(z_prev.rows() == p.z_dim(), "combiner z_prev must have z_dim rows");
  require_shape(h_rnn.rows() == p.rnn_hidden() && h_rnn.cols() == z_prev.cols(),
                "combiner hidden state must have rnn_hidden rows");
  const Matrix combined = 0.5 * (dense_forward(p.combiner_latent, z_prev, &c.latent) + h_rnn);
  c.mean = dense_forward(p.combiner_mean, combined, &c.mean_head);
  c.stddev = softplus(dense_forward(p.combiner_std, combined, &c.std_head)).array() + p.std_floor;
}

/// Returns d / d z_prev; d / d h_rnn is written to `dh_rnn`.
inline Matrix combiner_backward(const DmmParams& p, const CombinerCache& c, const Matrix& dmean,
                                const Matrix& dstd, DmmParams& g, Matrix& dh_rnn) {
  Matrix dcombined = dense_backward(p.combiner_mean, c.mean_head, dmean, g.combiner_mean);
  dcombined += dense_backward(p.combiner_std, c.std_head, dstd.cwiseProduct(sigmoid(c.std_head.pre)), g.combiner_std);
  dh_rnn = 0.5 * dcombined;
  return dense_backward(p.combiner_latent, c.latent, 0.5 * dcombined, g.combiner_latent);
}

// ---------------------------------------------------------------------------
// Single-sample distribution heads

inline GaussianDiag transition(const DmmParams& p, const Vector& z_prev) {
  TransitionCache c;
  transition_forward(p, Matrix(z_prev), c);
  return GaussianDiag(c.mean.col(0), c.stddev.col(0));
}

inline GaussianDiag emission(const DmmParams& p, const Vector& z) {
  EmissionCache c;
  emission_forward(p, Matrix(z), c);
  return GaussianDiag(c.mean.col(0), c.stddev.col(0));
}

inline GaussianDiag combiner(const DmmParams& p, const Vector& z_prev, const Vector& h_rnn) {
  CombinerCache c;
  combiner_forward(p, Matrix(z_prev), Matrix(h_rnn), c);
  return GaussianDiag(c.mean.col(0), c.stddev.col(0));
}

// ---------------------------------------------------------------------------
// ELBO

struct ElboResult {
  double elbo = 0.0;            // mean over sequences of the particle-averaged sum over t
  double reconstruction = 0.0;  // same averaging, log-likelihood part only
  double kl = 0.0;              // same averaging, unweighted KL part only
  Eigen::RowVectorXd per_column;  // per (sequence, particle) ELBO, kl_weight applied
  Eigen::RowVectorXd per_column_bound;  // per (sequence, particle) ELBO with kl_weight = 1
  DmmParams gradient;           // d elbo / d params (empty unless requested)
};

/// Standard-normal noise for `batch` sequences x `particles`, indexed [t](z, column).
inline std::vector<Matrix> draw_noise(Eigen::Index z_dim, Eigen::Index steps, Eigen::Index columns,
                                      std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Matrix> eps(static_cast<std::size_t>(steps), Matrix(z_dim, columns));
  for (auto& e : eps)
    for (Eigen::Index j = 0; j < e.cols(); ++j)
      for (Eigen::Index i = 0; i < e.rows(); ++i) e(i, j) = normal(rng);
  return eps;
}

namespace detail {

inline Eigen::Index common_length(const std::vector<const FeatureSequence*>& batch, Eigen::Index x_dim) {
  require_shape(!batch.empty(), "ELBO batch is empty");
  const auto steps = batch.front()->steps();
  require_shape(steps >= 1, "sequences need at least one timestep");
  for (const auto* fs : batch) {
    require_shape(fs->steps() == steps, "mixed sequence lengths in batch ('" + fs->session_id + "' has " +
                                            std::to_string(fs->steps()) + " steps, expected " +
                                            std::to_string(steps) + ")");
    require_shape(fs->dim() == x_dim, "sequence '" + fs->session_id + "' has feature dim " +
                                          std::to_string(fs->dim()) + ", model expects " +
                                          std::to_string(x_dim));
  }
  return steps;
}

/// xs[t] is x_dim x (batch * particles); column b * particles + k holds sequence b.
inline std::vector<Matrix> stack_inputs(const std::vector<const FeatureSequence*>& batch, Eigen::Index steps,
                                        int particles) {
  const auto n = static_cast<Eigen::Index>(batch.size()) * particles;
  std::vector<Matrix> xs(static_cast<std::size_t>(steps), Matrix(batch.front()->dim(), n));
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (int k = 0; k < particles; ++k) {
      const auto col = static_cast<Eigen::Index>(b) * particles + k;
      for (Eigen::Index t = 0; t < steps; ++t)
        xs[static_cast<std::size_t>(t)].col(col) = batch[b]->data.row(t).transpose();
    }
  return xs;
}

}  // namespace detail

/// ELBO of `batch` under fixed noise `eps` (as produced by draw_noise with
/// columns = batch.size() * particles).
inline ElboResult elbo_with_noise(const DmmParams& p, const std::vector<const FeatureSequence*>& batch,
                                  const std::vector<Matrix>& eps, int particles, double kl_weight,
                                  bool want_gradient = true) {
  if (!(kl_weight >= 0.0 && kl_weight <= 1.0)) throw ConfigError("kl_weight must lie in [0, 1]");
  const auto steps = detail::common_length(batch, p.x_dim());
  const auto ts = static_cast<std::size_t>(steps);
  require_shape(particles >= 1, "particles must be >= 1");
  const auto n = static_cast<Eigen::Index>(batch.size()) * particles;
  require_shape(eps.size() == ts, "noise must have one matrix per timestep");
  for (const auto& e : eps) require_shape(e.rows() == p.z_dim() && e.cols() == n, "noise matrix has wrong shape");

  const auto xs = detail::stack_inputs(batch, steps, particles);
  std::vector<GruCache> gru_caches;
  const auto hs = rnn_backward_pass(p.rnn, xs, p.h_init, want_gradient ? &gru_caches : nullptr);

  std::vector<CombinerCache> comb(ts);
  std::vector<TransitionCache> trans(ts);
  std::vector<EmissionCache> emit(ts);
  std::vector<Matrix> zs(ts + 1);  // zs[0] = z0, zs[t + 1] = sample at step t
  zs[0] = p.z0.replicate(1, n);

  ElboResult r;
  r.per_column = Eigen::RowVectorXd::Zero(n);
  r.per_column_bound = Eigen::RowVectorXd::Zero(n);
  Eigen::RowVectorXd recon_cols = Eigen::RowVectorXd::Zero(n);
  Eigen::RowVectorXd kl_cols_total = Eigen::RowVectorXd::Zero(n);
  for (std::size_t t = 0; t < ts; ++t) {
    combiner_forward(p, zs[t], hs[t], comb[t]);
    zs[t + 1] = comb[t].mean + comb[t].stddev.cwiseProduct(eps[t]);
    transition_forward(p, zs[t], trans[t]);
    emission_forward(p, zs[t + 1], emit[t]);
    const auto recon = gaussian_log_pdf_cols(emit[t].mean, emit[t].stddev, xs[t]);
    const auto kl = kl_cols(comb[t].mean, comb[t].stddev, trans[t].mean, trans[t].stddev);
    if (!recon.allFinite()) throw NumericalError("non-finite reconstruction term at t=" + std::to_string(t));
    if (!kl.allFinite()) throw NumericalError("non-finite KL term at t=" + std::to_string(t));
    recon_cols += recon;
    kl_cols_total += kl;
  }
  r.per_column = recon_cols - kl_weight * kl_cols_total;
  r.per_column_bound = recon_cols - kl_cols_total;
  const double inv_n = 1.0 / static_cast<double>(n);
  r.elbo = r.per_column.sum() * inv_n;
  r.reconstruction = recon_cols.sum() * inv_n;
  r.kl = kl_cols_total.sum() * inv_n;
  if (!std::isfinite(r.elbo)) throw NumericalError("non-finite ELBO");
  if (!want_gradient) return r;

  DmmParams& g = r.gradient = zeros_like(p);
  const auto zd = p.z_dim();
  std::vector<Matrix> dhs(ts);
  Matrix dz_carry = Matrix::Zero(zd, n);  // d elbo / d zs[t + 1] from later steps
  for (std::size_t t = ts; t-- > 0;) {
    Matrix dem = Matrix::Zero(p.x_dim(), n), des = Matrix::Zero(p.x_dim(), n);
    gaussian_log_pdf_grad(emit[t].mean, emit[t].stddev, xs[t], inv_n, dem, des);
    Matrix dz = dz_carry + emission_backward(p, emit[t], dem, des, g);

    Matrix dqm = Matrix::Zero(zd, n), dqs = Matrix::Zero(zd, n);
    Matrix dpm = Matrix::Zero(zd, n), dps = Matrix::Zero(zd, n);
    kl_grad(comb[t].mean, comb[t].stddev, trans[t].mean, trans[t].stddev, -kl_weight * inv_n, dqm, dqs, dpm, dps);
    dqm += dz;
    dqs += dz.cwiseProduct(eps[t]);

    dz_carry = combiner_backward(p, comb[t], dqm, dqs, g, dhs[t]);
    dz_carry += transition_backward(p, trans[t], dpm, dps, g);
  }
  g.z0 += dz_carry.rowwise().sum();

  Matrix dh = Matrix::Zero(p.rnn_hidden(), n);
  for (std::size_t t = 0; t < ts; ++t) dh = gru_backward(p.rnn, gru_caches[t], dhs[t] + dh, g.rnn);
  g.h_init += dh.rowwise().sum();
  return r;
}

inline ElboResult elbo(const DmmParams& p, const std::vector<const FeatureSequence*>& batch, double kl_weight,
                       std::mt19937_64& rng, int particles = 1, bool want_gradient = true) {
  const auto steps = detail::common_length(batch, p.x_dim());
  const auto eps = draw_noise(p.z_dim(), steps, static_cast<Eigen::Index>(batch.size()) * particles, rng);
  return elbo_with_noise(p, batch, eps, particles, kl_weight, want_gradient);
}

// ---------------------------------------------------------------------------
// Training

struct ElboTraceEntry {
  int epoch = 0;
  double elbo_per_step = 0.0;  // mean over sequences of the kl_weight = 1 ELBO, divided by T
  double kl_weight = 1.0;
  double seconds = 0.0;
};

using ElboTrace = std::vector<ElboTraceEntry>;

/// kl_floor at epoch 0 rising linearly to 1 at kl_anneal_epochs.
inline double kl_weight_at(const DmmConfig& cfg, int epoch) {
  if (cfg.kl_anneal_epochs <= 0) return 1.0;
  const double frac = std::min(1.0, static_cast<double>(epoch) / cfg.kl_anneal_epochs);
  return cfg.kl_floor + (1.0 - cfg.kl_floor) * frac;
}

struct TrainResult {
  DmmParams params;
  ElboTrace trace;
};

using EpochCallback = std::function<void(const ElboTraceEntry&)>;

inline TrainResult train(DmmConfig cfg, const std::vector<FeatureSequence>& unlabeled,
                         const EpochCallback& on_epoch = {}) {
  if (unlabeled.empty()) throw DataError("train: no unlabeled sequences");
  if (cfg.x_dim == 0) cfg.x_dim = unlabeled.front().dim();
  cfg.validate();
  std::vector<const FeatureSequence*> all;
  all.reserve(unlabeled.size());
  for (const auto& fs : unlabeled) all.push_back(&fs);
  const auto steps = detail::common_length(all, cfg.x_dim);

  TrainResult out{init_dmm_params(cfg), {}};
  AdamState<DmmParams> adam(out.params, cfg.learning_rate);
  std::mt19937_64 rng(derive_seed(cfg.seed, {0x7a11}));
  std::vector<std::size_t> order(all.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double w = kl_weight_at(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double bound_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const auto last = std::min(order.size(), first + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const FeatureSequence*> batch;
      for (std::size_t i = first; i < last; ++i) batch.push_back(all[order[i]]);
      try {
        auto r = elbo(out.params, batch, w, rng, cfg.particles);
        bound_sum += r.per_column_bound.sum() / cfg.particles;
        // ascend the ELBO: descend its negation
        visit_arrays([](const std::string&, auto& a) { a = -a; }, std::string{}, r.gradient);
        clip_by_global_norm(r.gradient, cfg.clip_norm);
        adam_step(adam, out.params, r.gradient);
      } catch (const NumericalError& e) {
        throw NumericalError("train: epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) +
                             ": " + e.detail());
      }
    }
    ElboTraceEntry entry;
    entry.epoch = epoch;
    entry.elbo_per_step = bound_sum / (static_cast<double>(all.size()) * static_cast<double>(steps));
    entry.kl_weight = w;
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.trace.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Latent features

/// Deterministic guide pass (combiner means, no sampling); row t of the
/// result is the latent at step t.
inline Matrix guide_means(const DmmParams& p, const FeatureSequence& fs) {
  require_shape(fs.dim() == p.x_dim(), "sequence '" + fs.session_id + "' has feature dim " +
                                           std::to_string(fs.dim()) + ", model expects " +
                                           std::to_string(p.x_dim()));
  const Matrix hs = run_rnn_backward(p.rnn, fs.data, p.h_init);
  Matrix out(fs.steps(), p.z_dim());
  Matrix z = p.z0;
  CombinerCache c;
  for (Eigen::Index t = 0; t < fs.steps(); ++t) {
    combiner_forward(p, z, Matrix(hs.row(t).transpose()), c);
    z = c.mean;
    out.row(t) = z.col(0).transpose();
  }
  return out;
}

inline Vector extract_latents(const DmmParams& p, const FeatureSequence& fs,
                              LatentAggregation mode = LatentAggregation::mean) {
  const Matrix zs = guide_means(p, fs);
  switch (mode) {
    case LatentAggregation::mean: return zs.colwise().mean().transpose();
    case LatentAggregation::last: return zs.row(zs.rows() - 1).transpose();
    case LatentAggregation::concat: {
      Vector v(zs.size());
      for (Eigen::Index t = 0; t < zs.rows(); ++t) v.segment(t * zs.cols(), zs.cols()) = zs.row(t).transpose();
      return v;
    }
  }
  return zs.colwise().mean().transpose();
}

// ---------------------------------------------------------------------------
// Oracle constructor

/// Parameters whose generative part reproduces `spec` exactly: the gate is
/// saturated to the linear branch (mean = A z), the trunk computes relu([z; -z])
/// so the emission mean is C z, and both std heads are constant. The guide is drawn from
/// `guide_seed`. Requires spec.initial_std == spec.process_std, since the
/// first prior is transition(z0 = 0).
inline DmmParams linearize(const LgssmSpec& spec, DmmConfig cfg, std::uint64_t guide_seed) {
  spec.validate();
  if (cfg.x_dim == 0) cfg.x_dim = spec.obs_dim();
  require_shape(cfg.z_dim == spec.latent_dim(), "linearize: z_dim must equal the LG-SSM latent dim");
  require_shape(cfg.x_dim == spec.obs_dim(), "linearize: x_dim must equal the LG-SSM observation dim");
  require_shape(cfg.emission_hidden >= 2 * spec.latent_dim(), "linearize: emission_hidden must be >= 2 * z_dim");
  if (std::abs(spec.initial_std - spec.process_std) > 1e-12)
    throw DataError("linearize: initial_std must equal process_std");
  if (!(spec.process_std > cfg.std_floor) || !(spec.observation_std > cfg.std_floor))
    throw DataError("linearize: noise scales must exceed std_floor");

  cfg.seed = guide_seed;
  DmmParams p = init_dmm_params(cfg);
  const auto m = spec.latent_dim();
  const auto he = cfg.emission_hidden;

  for (auto& layer : p.transition_gate.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  p.transition_gate.layers.back().bias.setConstant(-40.0);
  for (auto& layer : p.transition_proposal.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  p.transition_linear.weight = spec.transition;
  p.transition_linear.bias.setZero();
  p.transition_std.weight.setZero();
  p.transition_std.bias.setConstant(softplus_inverse(spec.process_std - cfg.std_floor));

  auto& first = p.emission_trunk.layers.front();
  first.weight.setZero();
  first.bias.setZero();
  first.weight.topRows(m) = Matrix::Identity(m, m);
  first.weight.middleRows(m, m) = -Matrix::Identity(m, m);
  for (std::size_t i = 1; i < p.emission_trunk.layers.size(); ++i) {
    auto& layer = p.emission_trunk.layers[i];
    layer.weight = Matrix::Identity(he, he);
    layer.bias.setZero();
  }
  p.emission_mean.weight.setZero();
  p.emission_mean.weight.leftCols(m) = spec.emission;
  p.emission_mean.weight.middleCols(m, m) = -spec.emission;
  p.emission_mean.bias.setZero();
  p.emission_std.weight.setZero();
  p.emission_std.bias.setConstant(softplus_inverse(spec.observation_std - cfg.std_floor));
  p.z0.setZero();
  return p;
}

}  // namespace dmmeeg
