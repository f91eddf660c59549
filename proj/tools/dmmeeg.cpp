// dmmeeg command-line driver.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmmeeg/config.hpp"
#include "dmmeeg/io.hpp"

namespace fs = std::filesystem;
using namespace dmmeeg;

namespace {

void log(const std::string& stage, const std::string& msg) { std::cerr << "[" << stage << "] " << msg << "\n"; }

/// Error raised with the stage name attached.
struct StageError {
  std::string stage;
  ErrorKind kind;
  std::string message;
};

struct Common {
  std::string config_path;
  std::string out;
  RunConfig config;
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numerical: return 3;
  }
  return 2;
}

/// Flag value, else the config's paths entry, else a usage error.
std::string resolve(const std::string& flag_value, const RunConfig& cfg, const std::string& key, const std::string& flag) {
  if (!flag_value.empty()) return flag_value;
  if (auto p = cfg.path(key)) return *p;
  throw ConfigError("missing " + flag + " (or paths." + key + " in the config)");
}

fs::path prepare_out(Common& c) {
  const fs::path dir = resolve(c.out, c.config, "out", "--out");
  fs::create_directories(dir);
  write_text_atomic(dir / "config.json", to_json(c.config).dump(2) + "\n");
  return dir;
}

void load_config(Common& c) {
  if (c.config_path.empty()) throw ConfigError("--config is required");
  c.config = parse_run_config(read_text(c.config_path));
}

std::optional<Label> label_from_path(const fs::path& p) {
  std::optional<Label> found;
  for (const auto& part : p) {
    const auto s = part.string();
    if (s == "abnormal") found = Label::abnormal;
    else if (s == "normal") found = Label::normal;
  }
  return found;
}

std::map<std::string, Label> read_label_csv(const fs::path& path) {
  std::map<std::string, Label> out;
  std::istringstream in(read_text(path));
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("'" + path.string() + "' line " + std::to_string(row) + ": expected id,label");
    const auto id = line.substr(0, comma), value = line.substr(comma + 1);
    if (row == 1 && id == "session_id") continue;
    out[id] = label_from_string(value);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string edf_dir, labels;
};

void cmd_ingest(Common& c, const IngestArgs& a) {
  const std::string stage = "ingest";
  std::vector<fs::path> files(a.inputs.begin(), a.inputs.end());
  if (files.empty()) {
    const fs::path dir = resolve(a.edf_dir, c.config, "edf_dir", "--edf-dir or --inputs");
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (e.is_regular_file() && ext == ".edf") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw DataError("ingest: no EDF files found");
  std::map<std::string, Label> labels;
  std::string labels_path = a.labels.empty() ? c.config.path("labels").value_or("") : a.labels;
  if (!labels_path.empty()) labels = read_label_csv(labels_path);

  const auto dir = prepare_out(c);
  TensorContainer out;
  std::set<std::string> ids;
  for (const auto& f : files) {
    const auto id = f.stem().string();
    if (!ids.insert(id).second) throw DataError("ingest: duplicate session id '" + id + "' (" + f.string() + ")");
    RawRecording rec;
    try {
      rec = parse_edf(read_file_bytes(f), id);
      if (c.config.features.clip_first_minute) rec = clip_first_minute(rec);
    } catch (const Error& e) {
      throw StageError{stage, e.kind(), "'" + f.string() + "': " + e.what()};
    }
    std::optional<Label> label = label_from_path(f);
    if (auto it = labels.find(id); it != labels.end()) label = it->second;
    add_recording(out, rec, label);
    log(stage, f.string() + ": " + std::to_string(rec.channels.size()) + " channels, " +
                   std::to_string(rec.duration_s) + " s" + (label ? std::string(", ") + to_string(*label) : ""));
  }
  write_container(dir / "recordings.dmmt", out);
  log(stage, "wrote " + (dir / "recordings.dmmt").string());
}

struct FeaturizeArgs {
  std::string recordings, standardizer;
  bool csv = false;
};

void cmd_featurize(Common& c, const FeaturizeArgs& a) {
  const std::string stage = "featurize";
  const fs::path in = resolve(a.recordings, c.config, "recordings", "--recordings");
  const auto recs = recordings_from_container(read_container(in));
  const auto dir = prepare_out(c);
  std::vector<FeatureSequence> seqs;
  for (const auto& r : recs) {
    try {
      FeatureSequence fs = band_power_features(apply_montage(r.recording, c.config.montage), c.config.bands,
                                               c.config.features.options);
      fs.label = r.label;
      seqs.push_back(std::move(fs));
    } catch (const Error& e) {
      throw StageError{stage, e.kind(), "session '" + r.recording.session_id + "': " + e.what()};
    }
  }
  if (seqs.empty()) throw DataError("featurize: '" + in.string() + "' holds no recordings");
  if (c.config.features.standardize) {
    const Standardizer s = a.standardizer.empty() ? fit_standardizer(seqs)
                                                  : standardizer_from_container(read_container(a.standardizer));
    for (auto& fs : seqs) fs = s.apply(fs);
    write_container(dir / "standardizer.dmmt", standardizer_to_container(s));
  }
  write_container(dir / "features.dmmt", dataset_to_container(seqs));
  if (a.csv) {
    fs::create_directories(dir / "csv");
    for (const auto& fs : seqs) write_text_atomic(dir / "csv" / (fs.session_id + ".csv"), sequence_csv(fs));
  }
  log(stage, "wrote " + std::to_string(seqs.size()) + " sequences of dim " + std::to_string(seqs.front().dim()) +
                 " to " + (dir / "features.dmmt").string());
}

void cmd_synth(Common& c) {
  const auto dir = prepare_out(c);
  const auto& s = c.config.synth;
  const auto [s0, s1] = s.specs();
  const auto train = generate(s0, s1, s.train_per_class, s.steps, c.config.synth_seed(0), "train");
  const auto test = generate(s0, s1, s.test_per_class, s.steps, c.config.synth_seed(1), "test");
  write_container(dir / "train.dmmt", dataset_to_container(train.sequences));
  write_container(dir / "test.dmmt", dataset_to_container(test.sequences));
  log("synth", "wrote " + std::to_string(train.sequences.size()) + " train and " +
                   std::to_string(test.sequences.size()) + " test sequences to " + dir.string());
}

struct TrainArgs {
  std::string train;
};

void cmd_train(Common& c, const TrainArgs& a) {
  const std::string stage = "train-dmm";
  const fs::path in = resolve(a.train, c.config, "train", "--train");
  const auto seqs = load_dataset(in);
  const auto dir = prepare_out(c);
  log(stage, "training on " + std::to_string(seqs.size()) + " sequences from " + in.string());
  TrainResult r;
  try {
    r = dmmeeg::train(c.config.dmm_config(), seqs, [&](const ElboTraceEntry& e) {
      log(stage, "epoch " + std::to_string(e.epoch) + " elbo/step " + fmt(e.elbo_per_step) + " kl_weight " +
                     fmt(e.kl_weight));
    });
  } catch (const Error& e) {
    throw StageError{stage, e.kind(), "'" + in.string() + "': " + e.what()};
  }
  write_container(dir / "model.dmmt", params_to_container(r.params));
  std::ostringstream csv;
  csv << "epoch,elbo,kl_weight,seconds\n";
  for (const auto& e : r.trace)
    csv << e.epoch << "," << fmt(e.elbo_per_step) << "," << fmt(e.kl_weight) << "," << fmt(e.seconds) << "\n";
  write_text_atomic(dir / "elbo_trace.csv", csv.str());
  log(stage, "wrote " + (dir / "model.dmmt").string());
}

std::string table_csv(const FeatureTable& t) {
  std::ostringstream out;
  out << "id,label";
  for (Eigen::Index j = 0; j < t.features.cols(); ++j) out << ",f" << j;
  out << "\n";
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    out << csv_escape(t.ids[i]) << "," << (t.labels[i] ? to_string(*t.labels[i]) : "");
    for (Eigen::Index j = 0; j < t.features.cols(); ++j) out << "," << fmt(t.features(static_cast<Eigen::Index>(i), j));
    out << "\n";
  }
  return out.str();
}

struct ExtractArgs {
  std::string model;
  std::vector<std::string> data;
  bool csv = false;
};

void cmd_extract(Common& c, const ExtractArgs& a) {
  const std::string stage = "extract-latents";
  const fs::path model = resolve(a.model, c.config, "model", "--model");
  const auto params = params_from_container(read_container(model));
  std::vector<std::string> inputs = a.data;
  if (inputs.empty())
    for (const char* key : {"train", "test"})
      if (auto p = c.config.path(key)) inputs.push_back(*p);
  if (inputs.empty()) throw ConfigError("missing --data");
  const auto dir = prepare_out(c);
  for (const auto& in : inputs) {
    const auto seqs = load_dataset(in);
    FeatureTable t;
    try {
      t = latent_table(params, seqs, c.config.dmm.aggregation);
    } catch (const Error& e) {
      throw StageError{stage, e.kind(), "'" + in + "': " + e.what()};
    }
    const auto stem = fs::path(in).stem().string();
    write_container(dir / (stem + "_latents.dmmt"), table_to_container(t));
    if (a.csv) write_text_atomic(dir / (stem + "_latents.csv"), table_csv(t));
    log(stage, in + ": " + std::to_string(t.ids.size()) + " x " + std::to_string(t.features.cols()) + " latents");
  }
}

struct TuneArgs {
  std::string features;
};

void cmd_tune(Common& c, const TuneArgs& a) {
  const fs::path in = resolve(a.features, c.config, "features", "--features");
  const auto t = load_features(in);
  const auto dir = prepare_out(c);
  const auto r = tune(t.features, t.known_labels(), c.config.knn.tune_budget, c.config.knn.tune_folds, c.config.tune_seed());
  Json j = hyper_to_json(r.best);
  j["cv_accuracy"] = r.cv_accuracy;
  write_text_atomic(dir / "hyper.json", j.dump(2) + "\n");
  std::ostringstream csv;
  csv << "trial,k,weighting,metric,cv_accuracy\n";
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const auto& tr = r.trials[i];
    csv << i << "," << tr.hyper.k << "," << to_string(tr.hyper.weighting) << "," << to_string(tr.hyper.metric) << ","
        << fmt(tr.cv_accuracy) << "\n";
  }
  write_text_atomic(dir / "tune_trials.csv", csv.str());
  log("tune-knn", "best k=" + std::to_string(r.best.k) + " " + to_string(r.best.weighting) + " " +
                      to_string(r.best.metric) + " cv accuracy " + fmt(r.cv_accuracy));
}

KnnHyper read_hyper(const fs::path& p) {
  Json j;
  try {
    j = Json::parse(read_text(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + p.string() + "': invalid JSON: " + e.what());
  }
  j.erase("cv_accuracy");
  return hyper_from_json(j, p.string());
}

struct FitArgs {
  std::string features, hyper;
};

void cmd_fit(Common& c, const FitArgs& a) {
  const fs::path in = resolve(a.features, c.config, "features", "--features");
  const auto t = load_features(in);
  const KnnHyper h = a.hyper.empty() ? c.config.knn.hyper : read_hyper(a.hyper);
  const auto model = fit(t.features, t.known_labels(), t.ids, h);
  const auto dir = prepare_out(c);
  write_container(dir / "knn.dmmt", knn_to_container(model));
  write_text_atomic(dir / "knn.json", hyper_to_json(h).dump(2) + "\n");
  log("fit-knn", "fitted on " + std::to_string(model.size()) + " samples from " + in.string());
}

KnnModel load_knn(const fs::path& dir) {
  return knn_from_container(read_container(dir / "knn.dmmt"), read_hyper(dir / "knn.json"));
}

struct QueryArgs {
  std::string model, features, reference;
  std::vector<std::string> ids;
  int k = 0;
};

void check_dims(const KnnModel& m, const FeatureTable& t, const std::string& where) {
  if (t.features.cols() != m.dim())
    throw DataError("'" + where + "': feature dim " + std::to_string(t.features.cols()) + " differs from the model's " +
                    std::to_string(m.dim()));
}

void cmd_predict(Common& c, const QueryArgs& a) {
  const fs::path mdir = resolve(a.model, c.config, "knn", "--model");
  const fs::path in = resolve(a.features, c.config, "features", "--features");
  const auto model = load_knn(mdir);
  const auto t = load_features(in);
  check_dims(model, t, in.string());
  const auto dir = prepare_out(c);
  std::ostringstream csv;
  csv << "id,label,score\n";
  std::size_t correct = 0, known = 0;
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    const auto p = predict(model, t.features.row(static_cast<Eigen::Index>(i)).transpose());
    csv << csv_escape(t.ids[i]) << "," << to_string(p.label) << "," << fmt(p.score) << "\n";
    if (t.labels[i]) {
      ++known;
      correct += *t.labels[i] == p.label;
    }
  }
  write_text_atomic(dir / "predictions.csv", csv.str());
  if (known) log("predict", "accuracy " + fmt(static_cast<double>(correct) / static_cast<double>(known)) + " on " +
                                std::to_string(known) + " labeled samples");
}

void cmd_explain(Common& c, const QueryArgs& a) {
  const fs::path mdir = resolve(a.model, c.config, "knn", "--model");
  const fs::path in = resolve(a.features, c.config, "features", "--features");
  const auto model = load_knn(mdir);
  const auto t = load_features(in);
  check_dims(model, t, in.string());
  const int k = a.k > 0 ? a.k : c.config.knn.explain_k;
  const fs::path ref_path = resolve(a.reference, c.config, "train", "--reference");
  const auto reference = load_dataset(ref_path);
  std::map<std::string, const FeatureSequence*> by_id;
  for (const auto& fs : reference) by_id[fs.session_id] = &fs;
  const SampleResolver resolver = [&](const std::string& id) -> const FeatureSequence* {
    auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : it->second;
  };
  std::vector<std::size_t> rows;
  if (a.ids.empty()) {
    for (std::size_t i = 0; i < t.ids.size(); ++i) rows.push_back(i);
  } else {
    for (const auto& id : a.ids) {
      auto it = std::find(t.ids.begin(), t.ids.end(), id);
      if (it == t.ids.end()) throw DataError("explain: '" + in.string() + "' has no sample '" + id + "'");
      rows.push_back(static_cast<std::size_t>(it - t.ids.begin()));
    }
  }
  const auto dir = prepare_out(c);
  std::ostringstream csv;
  csv << "query_id,rank,id,label,distance,steps\n";
  Json j = Json::array();
  for (auto r : rows) {
    std::vector<Explanation> ex;
    try {
      ex = explain(model, t.features.row(static_cast<Eigen::Index>(r)).transpose(), k, resolver);
    } catch (const Error& e) {
      throw StageError{"explain", e.kind(), "reference '" + ref_path.string() + "': " + e.what()};
    }
    Json neighbors = Json::array();
    for (std::size_t n = 0; n < ex.size(); ++n) {
      csv << csv_escape(t.ids[r]) << "," << n << "," << csv_escape(ex[n].sample_id) << "," << to_string(ex[n].label)
          << "," << fmt(ex[n].distance) << "," << ex[n].input_space->steps() << "\n";
      neighbors.push_back({{"id", ex[n].sample_id}, {"label", to_string(ex[n].label)}, {"distance", ex[n].distance}});
    }
    j.push_back({{"query_id", t.ids[r]}, {"neighbors", neighbors}});
  }
  write_text_atomic(dir / "explanations.csv", csv.str());
  write_text_atomic(dir / "explanations.json", j.dump(2) + "\n");
  log("explain", "explained " + std::to_string(rows.size()) + " samples with k=" + std::to_string(k));
}

struct EvaluateArgs {
  std::string train, test, model, train_latents, test_latents;
};

void cmd_evaluate(Common& c, const EvaluateArgs& a) {
  const std::string stage = "evaluate";
  const std::string train_path = a.train.empty() ? c.config.path("train").value_or("") : a.train;
  const std::string test_path = a.test.empty() ? c.config.path("test").value_or("") : a.test;
  const std::string model_path = a.model.empty() ? c.config.path("model").value_or("") : a.model;
  std::string lat_train = a.train_latents.empty() ? c.config.path("latents_train").value_or("") : a.train_latents;
  std::string lat_test = a.test_latents.empty() ? c.config.path("latents_test").value_or("") : a.test_latents;
  if (lat_train.empty() != lat_test.empty()) throw ConfigError("--train-latents and --test-latents go together");
  if (train_path.empty() != test_path.empty()) throw ConfigError("--train and --test go together");

  std::vector<std::pair<FeatureSpace, std::pair<FeatureTable, FeatureTable>>> spaces;
  std::optional<std::vector<FeatureSequence>> train_seqs, test_seqs;
  if (!train_path.empty()) {
    train_seqs = load_dataset(train_path);
    test_seqs = load_dataset(test_path);
  }
  if (!lat_train.empty()) {
    spaces.push_back({FeatureSpace::latent, {load_features(lat_train), load_features(lat_test)}});
  } else if (!model_path.empty() && train_seqs) {
    const auto params = params_from_container(read_container(model_path));
    spaces.push_back({FeatureSpace::latent,
                      {latent_table(params, *train_seqs, c.config.dmm.aggregation),
                       latent_table(params, *test_seqs, c.config.dmm.aggregation)}});
  }
  if (train_seqs) spaces.push_back({FeatureSpace::input, {input_table(*train_seqs), input_table(*test_seqs)}});
  if (spaces.empty()) throw ConfigError("evaluate needs --train/--test and/or latent tables");

  const auto dir = prepare_out(c);
  fs::create_directories(dir / "roc");
  ExperimentResult all;
  for (const auto& [space, tables] : spaces) {
    const auto& [tr, te] = tables;
    try {
      auto r = run_experiment(c.config.experiment(space), tr.features, tr.known_labels(), te.features, te.known_labels());
      for (auto& row : r.rows) all.rows.push_back(std::move(row));
    } catch (const Error& e) {
      throw StageError{stage, e.kind(), std::string(to_string(space)) + " features: " + e.what()};
    }
  }
  std::ostringstream csv;
  csv << "size,run,space,accuracy,auroc\n";
  for (const auto& r : all.rows) {
    csv << r.labeled_size << "," << r.run << "," << to_string(r.space) << "," << fmt(r.accuracy) << "," << fmt(r.auroc)
        << "\n";
    std::ostringstream roc;
    roc << "fpr,tpr\n";
    for (const auto& p : r.roc.points) roc << fmt(p.fpr) << "," << fmt(p.tpr) << "\n";
    write_text_atomic(dir / "roc" /
                          (std::string(to_string(r.space)) + "_size" + std::to_string(r.labeled_size) + "_run" +
                           std::to_string(r.run) + ".csv"),
                      roc.str());
  }
  write_text_atomic(dir / "results.csv", csv.str());
  std::ostringstream summary;
  summary << "size,space,accuracy_mean,accuracy_std,auroc_mean,auroc_std\n";
  for (const auto& s : summarize(all)) {
    summary << s.labeled_size << "," << to_string(s.space) << "," << fmt(s.accuracy_mean) << "," << fmt(s.accuracy_std)
            << "," << fmt(s.auroc_mean) << "," << fmt(s.auroc_std) << "\n";
    log(stage, std::string(to_string(s.space)) + " size " + std::to_string(s.labeled_size) + ": accuracy " +
                   fmt(s.accuracy_mean) + " auroc " + fmt(s.auroc_mean) + " +- " + fmt(s.auroc_std));
  }
  write_text_atomic(dir / "summary.csv", summary.str());
}

struct ProjectArgs {
  std::string features;
};

void cmd_project(Common& c, const ProjectArgs& a) {
  const fs::path in = resolve(a.features, c.config, "features", "--features");
  const auto t = load_features(in);
  const auto pr = pca_project(t.features);
  const auto dir = prepare_out(c);
  std::ostringstream csv;
  csv << "x,y,label\n";
  for (Eigen::Index i = 0; i < pr.coords.rows(); ++i) {
    const auto& l = t.labels[static_cast<std::size_t>(i)];
    csv << fmt(pr.coords(i, 0)) << "," << fmt(pr.coords.cols() > 1 ? pr.coords(i, 1) : 0.0) << ","
        << (l ? to_string(*l) : "") << "\n";
  }
  const auto name = "projection_" + (t.space.empty() ? std::string("features") : t.space);
  write_text_atomic(dir / (name + ".csv"), csv.str());
  Json j{{"explained", std::vector<double>(pr.explained.data(), pr.explained.data() + pr.explained.size())}};
  bool labeled = !t.labels.empty() && std::all_of(t.labels.begin(), t.labels.end(), [](const auto& l) { return l.has_value(); });
  if (labeled) {
    const double s = silhouette(pr.coords, t.known_labels());
    j["silhouette"] = s;
    log("project", t.space + " silhouette " + fmt(s));
  }
  write_text_atomic(dir / (name + ".json"), j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised EEG classification with a deep Markov model"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "run configuration (JSON)")->required();
    sub->add_option("-o,--out", common.out, "output directory");
  };

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "parse EDF recordings into a recordings container");
  add_common(s_ingest);
  s_ingest->add_option("--inputs", ingest.inputs, "EDF files");
  s_ingest->add_option("--edf-dir", ingest.edf_dir, "directory searched recursively for *.edf");
  s_ingest->add_option("--labels", ingest.labels, "CSV of session_id,label");

  FeaturizeArgs featurize;
  auto* s_feat = app.add_subcommand("featurize", "montage and band-power features");
  add_common(s_feat);
  s_feat->add_option("--recordings", featurize.recordings, "recordings container");
  s_feat->add_option("--standardizer", featurize.standardizer, "apply a previously fitted standardizer");
  s_feat->add_flag("--csv", featurize.csv, "also export one CSV per sequence");

  auto* s_synth = app.add_subcommand("synth", "generate the two-class synthetic corpus");
  add_common(s_synth);

  TrainArgs train;
  auto* s_train = app.add_subcommand("train-dmm", "train the deep Markov model on unlabeled sequences");
  add_common(s_train);
  s_train->add_option("--train", train.train, "sequence container");

  ExtractArgs extract;
  auto* s_extract = app.add_subcommand("extract-latents", "mean-pooled guide latents per sequence");
  add_common(s_extract);
  s_extract->add_option("--model", extract.model, "DMM checkpoint");
  s_extract->add_option("--data", extract.data, "sequence containers");
  s_extract->add_flag("--csv", extract.csv, "also export CSV");

  TuneArgs tune_args;
  auto* s_tune = app.add_subcommand("tune-knn", "random-search kNN hyperparameters");
  add_common(s_tune);
  s_tune->add_option("--features", tune_args.features, "feature table or sequence container");

  FitArgs fit_args;
  auto* s_fit = app.add_subcommand("fit-knn", "fit a kNN model");
  add_common(s_fit);
  s_fit->add_option("--features", fit_args.features, "feature table or sequence container");
  s_fit->add_option("--hyper", fit_args.hyper, "hyper.json from tune-knn");

  QueryArgs predict_args;
  auto* s_predict = app.add_subcommand("predict", "classify samples with a fitted kNN model");
  add_common(s_predict);
  s_predict->add_option("--model", predict_args.model, "fit-knn output directory");
  s_predict->add_option("--features", predict_args.features, "feature table or sequence container");

  QueryArgs explain_args;
  auto* s_explain = app.add_subcommand("explain", "nearest labeled neighbors per sample");
  add_common(s_explain);
  s_explain->add_option("--model", explain_args.model, "fit-knn output directory");
  s_explain->add_option("--features", explain_args.features, "feature table or sequence container");
  s_explain->add_option("--id", explain_args.ids, "sample ids to explain (default: all)");
  s_explain->add_option("-k", explain_args.k, "neighbors per sample");
  s_explain->add_option("--reference", explain_args.reference, "training sequences the model was fitted on");

  EvaluateArgs eval_args;
  auto* s_eval = app.add_subcommand("evaluate", "labeled-size experiment on latent and input features");
  add_common(s_eval);
  s_eval->add_option("--train", eval_args.train, "training sequences");
  s_eval->add_option("--test", eval_args.test, "test sequences");
  s_eval->add_option("--model", eval_args.model, "DMM checkpoint used to compute latents");
  s_eval->add_option("--train-latents", eval_args.train_latents, "precomputed training latents");
  s_eval->add_option("--test-latents", eval_args.test_latents, "precomputed test latents");

  ProjectArgs project_args;
  auto* s_project = app.add_subcommand("project", "2-D PCA projection");
  add_common(s_project);
  s_project->add_option("--features", project_args.features, "feature table or sequence container");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e) == 0) return 0;
    std::cerr << app.help();
    return 1;
  }

  auto* sub = app.get_subcommands().front();
  const std::string stage = sub->get_name();
  try {
    load_config(common);
    if (sub == s_ingest) cmd_ingest(common, ingest);
    else if (sub == s_feat) cmd_featurize(common, featurize);
    else if (sub == s_synth) cmd_synth(common);
    else if (sub == s_train) cmd_train(common, train);
    else if (sub == s_extract) cmd_extract(common, extract);
    else if (sub == s_tune) cmd_tune(common, tune_args);
    else if (sub == s_fit) cmd_fit(common, fit_args);
    else if (sub == s_predict) cmd_predict(common, predict_args);
    else if (sub == s_explain) cmd_explain(common, explain_args);
    else if (sub == s_eval) cmd_evaluate(common, eval_args);
    else if (sub == s_project) cmd_project(common, project_args);
  } catch (const StageError& e) {
    log(e.stage, "error: " + e.message);
    return exit_code(e.kind);
  } catch (const Error& e) {
    log(stage, std::string("error: ") + e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    log(stage, std::string("error: ") + e.what());
    return 2;
  } catch (const std::exception& e) {
    log(stage, std::string("error: ") + e.what());
    return 2;
  }
  return 0;
}
