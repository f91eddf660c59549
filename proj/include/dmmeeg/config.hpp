#pragma once

// JSON run configuration. Every section is optional except the top-level
// seed; unknown keys anywhere are rejected.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmmeeg/classify.hpp"
#include "dmmeeg/dmm.hpp"
#include "dmmeeg/eval.hpp"
#include "dmmeeg/preprocess.hpp"
#include "dmmeeg/synth.hpp"

namespace dmmeeg {

using Json = nlohmann::ordered_json;

struct FeatureSettings {
  FeatureOptions options;
  bool clip_first_minute = true;
  bool standardize = true;
};

struct SynthSettings {
  std::size_t train_per_class = 1000;
  std::size_t test_per_class = 100;
  Eigen::Index steps = 60;
  double angle0 = 0.3;
  double angle1 = 0.9;
  double radius = 0.95;
  double observation_std = 0.5;

  std::pair<LgssmSpec, LgssmSpec> specs() const {
    auto [s0, s1] = default_class_specs(observation_std);
    s0.transition = scaled_rotation(angle0, radius);
    s1.transition = scaled_rotation(angle1, radius);
    s0.process_std = s1.process_std = std::sqrt(std::max(1e-12, 1.0 - radius * radius));
    return {s0, s1};
  }
};

struct KnnSettings {
  KnnHyper hyper{};  // used by fit-knn when no tuned hyper file is given
  int tune_budget = 150;
  int tune_folds = 3;
  int explain_k = 5;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DmmConfig dmm;
  std::vector<std::size_t> labeled_sizes = ExperimentConfig{}.labeled_sizes;
  int runs = 5;
  MontageSpec montage = tcp_montage();
  std::vector<BandSpec> bands = standard_bands();
  FeatureSettings features;
  SynthSettings synth;
  KnnSettings knn;
  std::map<std::string, std::string> paths;

  // Stage seeds derived from the one configured seed.
  std::uint64_t dmm_seed() const { return derive_seed(seed, {0xd33}); }
  std::uint64_t experiment_seed() const { return derive_seed(seed, {0xe4e}); }
  std::uint64_t synth_seed(std::uint64_t part) const { return derive_seed(seed, {0x5e7, part}); }
  std::uint64_t tune_seed() const { return derive_seed(seed, {0x7c4}); }

  DmmConfig dmm_config() const {
    DmmConfig c = dmm;
    c.seed = dmm_seed();
    return c;
  }

  ExperimentConfig experiment(FeatureSpace space) const {
    ExperimentConfig e;
    e.labeled_sizes = labeled_sizes;
    e.runs = runs;
    e.seed = experiment_seed();
    e.feature_space = space;
    e.tune_budget = knn.tune_budget;
    e.tune_folds = knn.tune_folds;
    e.aggregation = dmm.aggregation;
    return e;
  }

  std::optional<std::string> path(const std::string& key) const {
    auto it = paths.find(key);
    if (it == paths.end()) return std::nullopt;
    return it->second;
  }
};

inline const std::set<std::string>& known_path_keys() {
  static const std::set<std::string> keys{"edf_dir", "labels", "recordings", "features", "train", "test",
                                          "model", "latents_train", "latents_test", "knn", "out"};
  return keys;
}

namespace config_detail {

/// Reads fields from one JSON object and reports whatever was not consumed.
class Section {
 public:
  Section(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  template <class E>
  void get_enum(const std::string& key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
    if (!j_.contains(key)) return;
    std::string s;
    get(key, s);
    for (const auto& [n, v] : names)
      if (s == n) {
        out = v;
        return;
      }
    throw ConfigError(where_ + "." + key + ": unknown value '" + s + "'");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

  const std::string& where() const { return where_; }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline const std::initializer_list<std::pair<const char*, LatentAggregation>> kAggregations{
    {"mean", LatentAggregation::mean}, {"last", LatentAggregation::last}, {"concat", LatentAggregation::concat}};
inline const std::initializer_list<std::pair<const char*, KnnWeighting>> kWeightings{
    {"uniform", KnnWeighting::uniform}, {"inverse_distance", KnnWeighting::inverse_distance}};
inline const std::initializer_list<std::pair<const char*, KnnMetric>> kMetrics{
    {"euclidean", KnnMetric::euclidean}, {"manhattan", KnnMetric::manhattan}};

inline const char* to_string(LatentAggregation a) {
  switch (a) {
    case LatentAggregation::mean: return "mean";
    case LatentAggregation::last: return "last";
    case LatentAggregation::concat: return "concat";
  }
  return "mean";
}

inline KnnHyper parse_hyper(Section& s) {
  KnnHyper h;
  int k = h.k;
  s.get("k", k);
  h.k = k;
  s.get_enum("weighting", h.weighting, kWeightings);
  s.get_enum("metric", h.metric, kMetrics);
  return h;
}

}  // namespace config_detail

inline Json hyper_to_json(const KnnHyper& h) {
  return Json{{"k", h.k}, {"weighting", to_string(h.weighting)}, {"metric", to_string(h.metric)}};
}

inline KnnHyper hyper_from_json(const Json& j, const std::string& where = "hyper") {
  config_detail::Section s(j, where);
  auto h = config_detail::parse_hyper(s);
  s.finish();
  validate_hyper(h);
  return h;
}

inline RunConfig parse_run_config(const Json& j) {
  using config_detail::Section;
  RunConfig c;
  Section top(j, "config");
  if (!top.has("seed")) throw ConfigError("config: 'seed' is required");
  const Json& seed = top.raw("seed");
  if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
    throw ConfigError("config.seed: expected a non-negative integer");
  c.seed = seed.get<std::uint64_t>();

  if (top.has("dmm")) {
    Section s(top.raw("dmm"), "config.dmm");
    auto& d = c.dmm;
    s.get("x_dim", d.x_dim);
    s.get("z_dim", d.z_dim);
    s.get("transition_hidden", d.transition_hidden);
    s.get("emission_hidden", d.emission_hidden);
    s.get("rnn_hidden", d.rnn_hidden);
    s.get("epochs", d.epochs);
    s.get("batch_size", d.batch_size);
    s.get("learning_rate", d.learning_rate);
    s.get("particles", d.particles);
    s.get("kl_anneal_epochs", d.kl_anneal_epochs);
    s.get("kl_floor", d.kl_floor);
    s.get("std_floor", d.std_floor);
    s.get("clip_norm", d.clip_norm);
    s.get_enum("aggregation", d.aggregation, config_detail::kAggregations);
    s.finish();
    if (d.x_dim < 0) throw ConfigError("config.dmm.x_dim must be >= 0 (0 infers it from the data)");
    DmmConfig probe = d;
    if (probe.x_dim == 0) probe.x_dim = 1;
    probe.validate();
  }

  if (top.has("experiment")) {
    Section s(top.raw("experiment"), "config.experiment");
    if (s.has("labeled_sizes")) {
      const Json& sizes = s.raw("labeled_sizes");
      if (!sizes.is_array()) throw ConfigError("config.experiment.labeled_sizes: expected an array");
      c.labeled_sizes.clear();
      for (const auto& v : sizes) {
        if (v.is_string() && v.get<std::string>() == "all") c.labeled_sizes.push_back(kAllLabeled);
        else if (v.is_number_unsigned()) c.labeled_sizes.push_back(v.get<std::size_t>());
        else throw ConfigError("config.experiment.labeled_sizes: entries must be positive integers or \"all\"");
      }
    }
    s.get("runs", c.runs);
    s.finish();
  }

  if (top.has("montage")) {
    Section s(top.raw("montage"), "config.montage");
    if (s.has("pairs")) {
      const Json& pairs = s.raw("pairs");
      if (!pairs.is_array()) throw ConfigError("config.montage.pairs: expected an array");
      c.montage.pairs.clear();
      for (const auto& p : pairs) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
          throw ConfigError("config.montage.pairs: each pair must be [\"ANODE\", \"CATHODE\"]");
        c.montage.pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
      }
    }
    s.finish();
    c.montage.validate();
  }

  if (top.has("bands")) {
    const Json& bands = top.raw("bands");
    if (!bands.is_array()) throw ConfigError("config.bands: expected an array");
    c.bands.clear();
    for (std::size_t i = 0; i < bands.size(); ++i) {
      Section s(bands[i], "config.bands[" + std::to_string(i) + "]");
      BandSpec b;
      s.get("name", b.name);
      s.get("low_hz", b.low_hz);
      s.get("high_hz", b.high_hz);
      s.finish();
      if (b.name.empty() || !(b.low_hz >= 0.0 && b.low_hz < b.high_hz))
        throw ConfigError(s.where() + ": needs a name and 0 <= low_hz < high_hz");
      c.bands.push_back(b);
    }
    if (c.bands.empty()) throw ConfigError("config.bands: at least one band required");
  }

  if (top.has("features")) {
    Section s(top.raw("features"), "config.features");
    s.get("window_s", c.features.options.window_s);
    s.get("channel_average", c.features.options.channel_average);
    s.get("clip_first_minute", c.features.clip_first_minute);
    s.get("standardize", c.features.standardize);
    s.finish();
    if (!(c.features.options.window_s > 0.0)) throw ConfigError("config.features.window_s must be positive");
  }

  if (top.has("synth")) {
    Section s(top.raw("synth"), "config.synth");
    auto& y = c.synth;
    s.get("train_per_class", y.train_per_class);
    s.get("test_per_class", y.test_per_class);
    s.get("steps", y.steps);
    s.get("angle0", y.angle0);
    s.get("angle1", y.angle1);
    s.get("radius", y.radius);
    s.get("observation_std", y.observation_std);
    s.finish();
    if (y.train_per_class < 1 || y.test_per_class < 1 || y.steps < 2)
      throw ConfigError("config.synth: need >= 1 sequence per class and steps >= 2");
    if (!(y.radius > 0.0 && y.radius < 1.0) || !(y.observation_std > 0.0))
      throw ConfigError("config.synth: radius must lie in (0, 1) and observation_std must be positive");
  }

  if (top.has("knn")) {
    Section s(top.raw("knn"), "config.knn");
    if (s.has("hyper")) {
      Section h(s.raw("hyper"), "config.knn.hyper");
      c.knn.hyper = config_detail::parse_hyper(h);
      h.finish();
    }
    s.get("tune_budget", c.knn.tune_budget);
    s.get("tune_folds", c.knn.tune_folds);
    s.get("explain_k", c.knn.explain_k);
    s.finish();
    validate_hyper(c.knn.hyper);
    if (c.knn.explain_k < 1) throw ConfigError("config.knn.explain_k must be >= 1");
  }

  if (top.has("paths")) {
    Section s(top.raw("paths"), "config.paths");
    for (const auto& key : known_path_keys()) {
      std::string v;
      if (s.has(key)) {
        s.get(key, v);
        c.paths[key] = v;
      }
    }
    s.finish();
  }

  top.finish();
  c.experiment(FeatureSpace::latent).validate();
  return c;
}

inline RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

/// Fully expanded configuration, every default written out.
inline Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  const auto& d = c.dmm;
  j["dmm"] = {{"x_dim", d.x_dim},
              {"z_dim", d.z_dim},
              {"transition_hidden", d.transition_hidden},
              {"emission_hidden", d.emission_hidden},
              {"rnn_hidden", d.rnn_hidden},
              {"epochs", d.epochs},
              {"batch_size", d.batch_size},
              {"learning_rate", d.learning_rate},
              {"particles", d.particles},
              {"kl_anneal_epochs", d.kl_anneal_epochs},
              {"kl_floor", d.kl_floor},
              {"std_floor", d.std_floor},
              {"clip_norm", d.clip_norm},
              {"aggregation", config_detail::to_string(d.aggregation)}};
  Json sizes = Json::array();
  for (auto s : c.labeled_sizes) {
    if (s == kAllLabeled) sizes.push_back("all");
    else sizes.push_back(s);
  }
  j["experiment"] = {{"labeled_sizes", sizes}, {"runs", c.runs}};
  Json pairs = Json::array();
  for (const auto& [a, k] : c.montage.pairs) pairs.push_back({a, k});
  j["montage"] = {{"pairs", pairs}};
  Json bands = Json::array();
  for (const auto& b : c.bands) bands.push_back({{"name", b.name}, {"low_hz", b.low_hz}, {"high_hz", b.high_hz}});
  j["bands"] = bands;
  j["features"] = {{"window_s", c.features.options.window_s},
                   {"channel_average", c.features.options.channel_average},
                   {"clip_first_minute", c.features.clip_first_minute},
                   {"standardize", c.features.standardize}};
  const auto& y = c.synth;
  j["synth"] = {{"train_per_class", y.train_per_class}, {"test_per_class", y.test_per_class},
                {"steps", y.steps},                     {"angle0", y.angle0},
                {"angle1", y.angle1},                   {"radius", y.radius},
                {"observation_std", y.observation_std}};
  j["knn"] = {{"hyper", hyper_to_json(c.knn.hyper)},
              {"tune_budget", c.knn.tune_budget},
              {"tune_folds", c.knn.tune_folds},
              {"explain_k", c.knn.explain_k}};
  Json paths = Json::object();
  for (const auto& [k, v] : c.paths) paths[k] = v;
  j["paths"] = paths;
  return j;
}

}  // namespace dmmeeg
