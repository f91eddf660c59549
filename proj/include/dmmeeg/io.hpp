#pragma once

// Container layouts for the pipeline artifacts, plus CSV helpers.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dmmeeg/classify.hpp"
#include "dmmeeg/container.hpp"
#include "dmmeeg/dmm.hpp"
#include "dmmeeg/edf.hpp"
#include "dmmeeg/preprocess.hpp"

namespace dmmeeg {

inline std::int64_t label_code(const std::optional<Label>& l) { return l ? static_cast<std::int64_t>(*l) : -1; }

inline std::optional<Label> label_from_code(std::int64_t v, const std::string& where) {
  if (v == -1) return std::nullopt;
  if (v == 0 || v == 1) return static_cast<Label>(v);
  throw FormatError(where + ": label code must be -1, 0 or 1");
}

inline NamedArray marker(std::string name) {
  NamedArray a;
  a.name = std::move(name);
  a.dims = {0};
  a.values = std::vector<std::int64_t>{};
  return a;
}

inline std::string strip_prefix(const std::string& name, const std::string& prefix) {
  return name.compare(0, prefix.size(), prefix) == 0 ? name.substr(prefix.size()) : std::string{};
}

// ---------------------------------------------------------------------------
// Sequence datasets: feature_name/<name> markers (in column order), then per
// sequence seq/<id> [T, D] and label/<id> [1].

inline TensorContainer dataset_to_container(const std::vector<FeatureSequence>& seqs) {
  TensorContainer c;
  if (!seqs.empty())
    for (const auto& n : seqs.front().feature_names) c.add(marker("feature_name/" + n));
  for (const auto& fs : seqs) {
    c.add(make_array("seq/" + fs.session_id, fs.data));
    c.add(make_array("label/" + fs.session_id, std::vector<std::int64_t>{label_code(fs.label)}));
  }
  return c;
}

inline std::vector<FeatureSequence> dataset_from_container(const TensorContainer& c) {
  std::vector<std::string> names;
  std::vector<FeatureSequence> out;
  for (const auto& a : c.arrays) {
    if (auto n = strip_prefix(a.name, "feature_name/"); !n.empty()) {
      names.push_back(n);
    } else if (auto id = strip_prefix(a.name, "seq/"); !id.empty()) {
      FeatureSequence fs;
      fs.session_id = id;
      fs.data = to_matrix(a);
      const auto labels = to_ints(c.at("label/" + id));
      if (labels.size() != 1) throw FormatError("label/" + id + " must hold one value");
      fs.label = label_from_code(labels[0], "label/" + id);
      out.push_back(std::move(fs));
    }
  }
  if (out.empty()) throw FormatError("container holds no sequences (expected seq/<id> arrays)");
  for (auto& fs : out) {
    if (!names.empty() && static_cast<Eigen::Index>(names.size()) != fs.dim())
      throw FormatError("sequence '" + fs.session_id + "' disagrees with the feature name list");
    fs.feature_names = names;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature tables: one row per sample. Arrays: features [N, F], labels [N],
// id/<id> [1] holding the row index, space/<name> marker.

struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::optional<Label>> labels;
  Matrix features;
  std::string space;  // "latent" or "input"

  std::vector<Label> known_labels() const {
    std::vector<Label> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!labels[i]) throw DataError("sample '" + ids[i] + "' has no label");
      out.push_back(*labels[i]);
    }
    return out;
  }
};

inline TensorContainer table_to_container(const FeatureTable& t) {
  TensorContainer c;
  c.add(marker("space/" + t.space));
  c.add(make_array("features", t.features));
  std::vector<std::int64_t> labels;
  for (const auto& l : t.labels) labels.push_back(label_code(l));
  c.add(make_array("labels", labels));
  for (std::size_t i = 0; i < t.ids.size(); ++i)
    c.add(make_array("id/" + t.ids[i], std::vector<std::int64_t>{static_cast<std::int64_t>(i)}));
  return c;
}

inline FeatureTable table_from_container(const TensorContainer& c) {
  FeatureTable t;
  t.features = to_matrix(c.at("features"));
  const auto codes = to_ints(c.at("labels"));
  const auto n = static_cast<std::size_t>(t.features.rows());
  if (codes.size() != n) throw FormatError("labels length disagrees with feature rows");
  for (auto code : codes) t.labels.push_back(label_from_code(code, "labels"));
  t.ids.assign(n, {});
  std::vector<bool> seen(n, false);
  for (const auto& a : c.arrays) {
    if (auto s = strip_prefix(a.name, "space/"); !s.empty()) t.space = s;
    if (auto id = strip_prefix(a.name, "id/"); !id.empty()) {
      const auto v = to_ints(a);
      if (v.size() != 1 || v[0] < 0 || static_cast<std::size_t>(v[0]) >= n || seen[static_cast<std::size_t>(v[0])])
        throw FormatError("id/" + id + " has an invalid row index");
      seen[static_cast<std::size_t>(v[0])] = true;
      t.ids[static_cast<std::size_t>(v[0])] = id;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw FormatError("feature row " + std::to_string(i) + " has no id");
  return t;
}

/// Input-space table: time-mean per sequence.
inline FeatureTable input_table(const std::vector<FeatureSequence>& seqs) {
  FeatureTable t;
  t.space = "input";
  t.features.resize(static_cast<Eigen::Index>(seqs.size()), seqs.empty() ? 0 : seqs.front().dim());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    t.ids.push_back(seqs[i].session_id);
    t.labels.push_back(seqs[i].label);
    t.features.row(static_cast<Eigen::Index>(i)) = time_mean(seqs[i]).transpose();
  }
  return t;
}

inline FeatureTable latent_table(const DmmParams& p, const std::vector<FeatureSequence>& seqs,
                                 LatentAggregation mode) {
  FeatureTable t;
  t.space = "latent";
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const Vector z = extract_latents(p, seqs[i], mode);
    if (i == 0) t.features.resize(static_cast<Eigen::Index>(seqs.size()), z.size());
    require_shape(z.size() == t.features.cols(), "latent features differ in length (aggregation 'concat' needs equal T)");
    t.ids.push_back(seqs[i].session_id);
    t.labels.push_back(seqs[i].label);
    t.features.row(static_cast<Eigen::Index>(i)) = z.transpose();
  }
  return t;
}

/// Reads a feature table, or a sequence dataset reduced to its input-space table.
inline FeatureTable load_features(const std::filesystem::path& path) {
  const auto c = read_container(path);
  try {
    if (c.find("features")) return table_from_container(c);
    return input_table(dataset_from_container(c));
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.detail());
  }
}

inline std::vector<FeatureSequence> load_dataset(const std::filesystem::path& path) {
  const auto c = read_container(path);
  try {
    return dataset_from_container(c);
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.detail());
  }
}

// ---------------------------------------------------------------------------
// DMM parameters: one array per visited parameter plus std_floor [1]. Layer
// sizes are recovered from the stored shapes.

inline TensorContainer params_to_container(const DmmParams& p) {
  TensorContainer c;
  visit_arrays([&](const std::string& name, const auto& a) { c.add(make_array(name, a)); }, std::string{}, p);
  c.add(make_array("std_floor", Vector::Constant(1, p.std_floor)));
  return c;
}

inline DmmParams params_from_container(const TensorContainer& c) {
  DmmConfig cfg;
  auto rows = [&](const std::string& name) {
    const auto& a = c.at(name);
    if (a.dims.empty()) throw FormatError("array '" + name + "' has no dimensions");
    return static_cast<Eigen::Index>(a.dims[0]);
  };
  cfg.z_dim = rows("z0");
  cfg.x_dim = rows("emission.mean.bias");
  cfg.transition_hidden = rows("transition.gate.0.bias");
  cfg.emission_hidden = rows("emission.trunk.0.bias");
  cfg.rnn_hidden = rows("guide.h_init");
  const Vector floor = to_vector(c.at("std_floor"));
  if (floor.size() != 1) throw FormatError("std_floor must hold one value");
  cfg.std_floor = floor(0);
  DmmParams p = make_dmm_params(cfg);
  visit_arrays([&](const std::string& name, auto& a) { load_into(a, c.at(name)); }, std::string{}, p);
  return p;
}

// ---------------------------------------------------------------------------
// Standardizer: mean [D], scale [D].

inline TensorContainer standardizer_to_container(const Standardizer& s) {
  TensorContainer c;
  c.add(make_array("mean", s.mean));
  c.add(make_array("scale", s.scale));
  return c;
}

inline Standardizer standardizer_from_container(const TensorContainer& c) {
  Standardizer s{to_vector(c.at("mean")), to_vector(c.at("scale"))};
  if (s.mean.size() != s.scale.size()) throw FormatError("standardizer mean and scale differ in length");
  if ((s.scale.array() <= 0.0).any()) throw FormatError("standardizer scale must be positive");
  return s;
}

// ---------------------------------------------------------------------------
// kNN model: the training table (hyperparameters live in a JSON sidecar).

inline TensorContainer knn_to_container(const KnnModel& m) {
  FeatureTable t;
  t.features = m.features;
  t.ids = m.sample_ids;
  for (auto l : m.labels) t.labels.push_back(l);
  t.space = "model";
  return table_to_container(t);
}

inline KnnModel knn_from_container(const TensorContainer& c, const KnnHyper& hyper) {
  const auto t = table_from_container(c);
  return fit(t.features, t.known_labels(), t.ids, hyper);
}

// ---------------------------------------------------------------------------
// Raw recordings: per channel signal/<session>/<label> [S] and
// rate/<session>/<label> [1], plus duration/<session> [1] and label/<session> [1].

inline void add_recording(TensorContainer& c, const RawRecording& r, const std::optional<Label>& label) {
  c.add(make_array("duration/" + r.session_id, Vector::Constant(1, r.duration_s)));
  c.add(make_array("label/" + r.session_id, std::vector<std::int64_t>{label_code(label)}));
  for (const auto& ch : r.channels) {
    const Vector s = Eigen::Map<const Vector>(ch.samples.data(), static_cast<Eigen::Index>(ch.samples.size()));
    c.add(make_array("signal/" + r.session_id + "/" + ch.calibration.label, s));
    c.add(make_array("rate/" + r.session_id + "/" + ch.calibration.label, Vector::Constant(1, ch.sample_rate_hz)));
  }
}

struct LabeledRecording {
  RawRecording recording;
  std::optional<Label> label;
};

inline std::vector<LabeledRecording> recordings_from_container(const TensorContainer& c) {
  std::vector<LabeledRecording> out;
  std::map<std::string, std::size_t> index;
  for (const auto& a : c.arrays) {
    if (auto id = strip_prefix(a.name, "duration/"); !id.empty()) {
      LabeledRecording r;
      r.recording.session_id = id;
      r.recording.duration_s = to_vector(a)(0);
      const auto code = to_ints(c.at("label/" + id));
      if (code.size() != 1) throw FormatError("label/" + id + " must hold one value");
      r.label = label_from_code(code[0], "label/" + id);
      index[id] = out.size();
      out.push_back(std::move(r));
    }
  }
  for (const auto& a : c.arrays) {
    auto rest = strip_prefix(a.name, "signal/");
    if (rest.empty()) continue;
    // session ids may contain '/', channel labels may not
    const auto slash = rest.rfind('/');
    if (slash == std::string::npos) throw FormatError("malformed signal array name '" + a.name + "'");
    const auto id = rest.substr(0, slash);
    auto it = index.find(id);
    if (it == index.end()) throw FormatError("signal for unknown session '" + id + "'");
    Channel ch;
    ch.calibration.label = rest.substr(slash + 1);
    const Vector s = to_vector(a);
    ch.samples.assign(s.data(), s.data() + s.size());
    ch.sample_rate_hz = to_vector(c.at("rate/" + rest))(0);
    out[it->second].recording.channels.push_back(std::move(ch));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest round-trip decimal representation.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // prefer the shortest representation that parses back exactly
  for (int prec = 1; prec <= 17; ++prec) {
    char shorter[32];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string sequence_csv(const FeatureSequence& fs) {
  std::ostringstream out;
  for (std::size_t j = 0; j < fs.feature_names.size(); ++j) out << (j ? "," : "") << csv_escape(fs.feature_names[j]);
  out << "\n";
  for (Eigen::Index t = 0; t < fs.steps(); ++t) {
    for (Eigen::Index j = 0; j < fs.dim(); ++j) out << (j ? "," : "") << fmt(fs.data(t, j));
    out << "\n";
  }
  return out.str();
}

}  // namespace dmmeeg
