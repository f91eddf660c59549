#pragma once

// Bipolar montage derivation, per-window band-power features and
// feature standardization.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "dmmeeg/dataset.hpp"
#include "dmmeeg/edf.hpp"

namespace dmmeeg {

struct MontageSpec {
  std::vector<std::pair<std::string, std::string>> pairs;  // (anode, cathode)

  void validate() const {
    if (pairs.empty()) throw ConfigError("montage must contain at least one pair");
    for (const auto& [a, c] : pairs)
      if (a == c) throw ConfigError("montage pair uses '" + a + "' as both anode and cathode");
  }
};

/// The 22-channel transverse central parietal (TCP) bipolar montage.
inline MontageSpec tcp_montage() {
  return MontageSpec{{{"FP1", "F7"}, {"F7", "T3"},  {"T3", "T5"},  {"T5", "O1"},  {"FP2", "F8"}, {"F8", "T4"},
                      {"T4", "T6"},  {"T6", "O2"},  {"A1", "T3"},  {"T3", "C3"},  {"C3", "CZ"},  {"CZ", "C4"},
                      {"C4", "T4"},  {"T4", "A2"},  {"FP1", "F3"}, {"F3", "C3"},  {"C3", "P3"},  {"P3", "O1"},
                      {"FP2", "F4"}, {"F4", "C4"},  {"C4", "P4"},  {"P4", "O2"}}};
}

/// Upper-cases and strips the "EEG " prefix and "-REF" / "-LE" suffixes.
inline std::string normalize_label(std::string label) {
  std::transform(label.begin(), label.end(), label.begin(), [](unsigned char c) { return std::toupper(c); });
  auto trim = [](std::string& s) {
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    while (!s.empty() && s.back() == ' ') s.pop_back();
  };
  trim(label);
  if (label.rfind("EEG ", 0) == 0) label.erase(0, 4);
  for (const char* suffix : {"-REF", "-LE"}) {
    const std::string sfx(suffix);
    if (label.size() > sfx.size() && label.compare(label.size() - sfx.size(), sfx.size(), sfx) == 0)
      label.erase(label.size() - sfx.size());
  }
  trim(label);
  return label;
}

/// Channel i of the result is anode_i - cathode_i, in uV.
inline RawRecording apply_montage(const RawRecording& rec, const MontageSpec& spec) {
  spec.validate();
  auto find = [&](const std::string& wanted) -> const Channel& {
    const auto key = normalize_label(wanted);
    for (const auto& ch : rec.channels)
      if (normalize_label(ch.calibration.label) == key) return ch;
    throw DataError("montage: recording '" + rec.session_id + "' is missing channel '" + wanted + "'");
  };
  RawRecording out;
  out.session_id = rec.session_id;
  out.duration_s = rec.duration_s;
  for (const auto& [anode_label, cathode_label] : spec.pairs) {
    const Channel& a = find(anode_label);
    const Channel& c = find(cathode_label);
    if (a.sample_rate_hz != c.sample_rate_hz || a.samples.size() != c.samples.size())
      throw DataError("montage: channels '" + anode_label + "' and '" + cathode_label + "' in '" + rec.session_id +
                      "' differ in sample rate or length");
    Channel ch;
    ch.calibration = a.calibration;
    ch.calibration.label = normalize_label(anode_label) + "-" + normalize_label(cathode_label);
    ch.sample_rate_hz = a.sample_rate_hz;
    ch.samples.resize(a.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) ch.samples[i] = a.samples[i] - c.samples[i];
    out.channels.push_back(std::move(ch));
  }
  return out;
}

struct BandSpec {
  std::string name;
  double low_hz = 0.0;
  double high_hz = 0.0;
};

/// Delta 0.5-4, theta 4-8, alpha 8-12, beta 12-30 Hz.
inline std::vector<BandSpec> standard_bands() {
  return {{"delta", 0.5, 4.0}, {"theta", 4.0, 8.0}, {"alpha", 8.0, 12.0}, {"beta", 12.0, 30.0}};
}

inline constexpr double kLogPowerFloor = 1e-12;

/// One-sided periodogram of mean-removed, periodic-Hann-tapered windows.
/// Bin k sits at k * rate / n; summed bins equal the mean square of the
/// tapered window.
class Periodogram {
 public:
  explicit Periodogram(Eigen::Index n) : n_(n), bins_(n / 2 + 1), taper_(n), cos_(bins_, n), sin_(bins_, n) {
    if (n < 2) throw DataError("periodogram window needs at least two samples");
    const double two_pi = 2.0 * std::numbers::pi;
    for (Eigen::Index i = 0; i < n; ++i)
      taper_[i] = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n)));
    for (Eigen::Index k = 0; k < bins_; ++k)
      for (Eigen::Index i = 0; i < n; ++i) {
        // reduce k * i mod n first so large products keep full precision
        const double phase = two_pi * static_cast<double>((k * i) % n) / static_cast<double>(n);
        cos_(k, i) = std::cos(phase);
        sin_(k, i) = std::sin(phase);
      }
  }

  Eigen::Index window() const { return n_; }
  Eigen::Index bins() const { return bins_; }

  /// Tapered, mean-removed copies of the columns of `windows` (n x W).
  Matrix tapered(const Matrix& windows) const {
    Matrix y = windows.rowwise() - windows.colwise().mean();
    return taper_.asDiagonal() * y;
  }

  /// Power per bin for each column of `windows` (n x W) -> bins x W.
  Matrix power(const Matrix& windows) const {
    require_shape(windows.rows() == n_, "periodogram window length mismatch");
    const Matrix y = tapered(windows);
    const Matrix re = cos_ * y;
    const Matrix im = sin_ * y;
    Matrix p = (re.array().square() + im.array().square()).matrix() / static_cast<double>(n_ * n_);
    const Eigen::Index last_doubled = (n_ % 2 == 0) ? bins_ - 2 : bins_ - 1;
    if (last_doubled >= 1) p.middleRows(1, last_doubled) *= 2.0;
    return p;
  }

 private:
  Eigen::Index n_, bins_;
  Vector taper_;
  Matrix cos_, sin_;
};

struct FeatureOptions {
  double window_s = 1.0;
  bool channel_average = false;  // true: D = number of bands
};

/// log10(band power + 1e-12) per non-overlapping window, columns ordered
/// channel-major, band-minor. Trailing partial windows are dropped.
inline FeatureSequence band_power_features(const RawRecording& rec, const std::vector<BandSpec>& bands,
                                           const FeatureOptions& opt = {}) {
  if (rec.channels.empty()) throw DataError("band_power_features: recording '" + rec.session_id + "' has no channels");
  if (bands.empty()) throw ConfigError("band_power_features: no bands");
  const double rate = rec.channels.front().sample_rate_hz;
  for (const auto& ch : rec.channels)
    if (ch.sample_rate_hz != rate || ch.samples.size() != rec.channels.front().samples.size())
      throw DataError("band_power_features: channels of '" + rec.session_id + "' differ in rate or length");
  const double exact_n = opt.window_s * rate;
  const auto n = static_cast<Eigen::Index>(std::llround(exact_n));
  if (std::abs(exact_n - static_cast<double>(n)) > 1e-9 || n < 2)
    throw ConfigError("window of " + std::to_string(opt.window_s) + " s is not a whole number of samples");
  const auto windows = static_cast<Eigen::Index>(rec.channels.front().samples.size()) / n;
  if (windows < 1) throw DataError("recording '" + rec.session_id + "' is shorter than one window");

  const Periodogram pg(n);
  std::vector<std::vector<Eigen::Index>> band_bins;
  for (const auto& b : bands) {
    if (!(b.low_hz >= 0.0 && b.low_hz < b.high_hz && b.high_hz <= rate / 2.0))
      throw ConfigError("band '" + b.name + "' must satisfy 0 <= low < high <= Nyquist");
    std::vector<Eigen::Index> bins;
    for (Eigen::Index k = 0; k < pg.bins(); ++k) {
      const double f = static_cast<double>(k) * rate / static_cast<double>(n);
      if (f >= b.low_hz && f < b.high_hz) bins.push_back(k);
    }
    if (bins.empty()) throw DataError("band '" + b.name + "' contains no frequency bins at this resolution");
    band_bins.push_back(std::move(bins));
  }

  const auto nb = static_cast<Eigen::Index>(bands.size());
  const auto nc = static_cast<Eigen::Index>(rec.channels.size());
  Matrix power(windows, nc * nb);  // linear band power
  for (Eigen::Index c = 0; c < nc; ++c) {
    const auto& s = rec.channels[static_cast<std::size_t>(c)].samples;
    const Matrix segs = Eigen::Map<const Matrix>(s.data(), n, windows);
    const Matrix p = pg.power(segs);
    for (Eigen::Index b = 0; b < nb; ++b) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(windows);
      for (auto k : band_bins[static_cast<std::size_t>(b)]) acc += p.row(k);
      power.col(c * nb + b) = acc.transpose();
    }
  }

  FeatureSequence fs;
  fs.session_id = rec.session_id;
  if (opt.channel_average) {
    Matrix avg = Matrix::Zero(windows, nb);
    for (Eigen::Index c = 0; c < nc; ++c) avg += power.middleCols(c * nb, nb);
    power = avg / static_cast<double>(nc);
    for (const auto& b : bands) fs.feature_names.push_back(b.name);
  } else {
    for (const auto& ch : rec.channels)
      for (const auto& b : bands) fs.feature_names.push_back(ch.calibration.label + ":" + b.name);
  }
  fs.data = (power.array() + kLogPowerFloor).log10().matrix();
  if (!fs.data.allFinite()) throw NumericalError("non-finite band-power features for '" + rec.session_id + "'");
  return fs;
}

/// Per-column affine map fitted on training sequences.
struct Standardizer {
  Vector mean;
  Vector scale;  // max(std, 1e-6)

  FeatureSequence apply(FeatureSequence fs) const {
    require_shape(fs.dim() == mean.size(), "standardizer fitted on " + std::to_string(mean.size()) +
                                               " features, sequence '" + fs.session_id + "' has " +
                                               std::to_string(fs.dim()));
    fs.data = ((fs.data.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
    return fs;
  }
};

inline constexpr double kStandardizerFloor = 1e-6;

/// Column means and population standard deviations over every row of every sequence.
inline Standardizer fit_standardizer(const std::vector<FeatureSequence>& train) {
  if (train.empty()) throw DataError("fit_standardizer: no training sequences");
  const auto d = train.front().dim();
  Vector sum = Vector::Zero(d);
  double rows = 0.0;
  for (const auto& fs : train) {
    require_shape(fs.dim() == d, "fit_standardizer: sequences differ in feature dimension");
    sum += fs.data.colwise().sum().transpose();
    rows += static_cast<double>(fs.steps());
  }
  if (rows == 0.0) throw DataError("fit_standardizer: sequences have no rows");
  Standardizer s;
  s.mean = sum / rows;
  Vector ss = Vector::Zero(d);
  for (const auto& fs : train) ss += (fs.data.rowwise() - s.mean.transpose()).array().square().matrix().colwise().sum().transpose();
  s.scale = (ss / rows).cwiseSqrt().cwiseMax(kStandardizerFloor);
  return s;
}

inline FeatureSequence apply_standardizer(const Standardizer& s, const FeatureSequence& fs) { return s.apply(fs); }

}  // namespace dmmeeg
