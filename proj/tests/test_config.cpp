#include <gtest/gtest.h>

#include "dmmeeg/config.hpp"

using namespace dmmeeg;

TEST(Config, SeedRequired) {
  EXPECT_THROW(parse_run_config(std::string("{}")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": -1})")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": "7"})")), ConfigError);
  EXPECT_EQ(parse_run_config(std::string(R"({"seed": 7})")).seed, 7u);
}

TEST(Config, UnknownKeysRejectedEverywhere) {
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": 1, "sede": 2})")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": 1, "dmm": {"zdim": 2}})")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": 1, "knn": {"hyper": {"k": 3, "p": 2}}})")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": 1, "paths": {"modle": "x"}})")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": 1, "bands": [{"name": "a", "low": 1}]})")), ConfigError);
}

TEST(Config, InvalidJsonAndValues) {
  EXPECT_THROW(parse_run_config(std::string("{seed: 1")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": 1, "dmm": {"epochs": -1}})")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": 1, "dmm": {"aggregation": "max"}})")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": 1, "knn": {"hyper": {"k": 4}}})")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": 1, "experiment": {"labeled_sizes": [10, 5]}})")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string(R"({"seed": 1, "dmm": {"z_dim": "big"}})")), ConfigError);
}

TEST(Config, DefaultsMatchLibraryDefaults) {
  const auto c = parse_run_config(std::string(R"({"seed": 3})"));
  EXPECT_EQ(c.dmm.epochs, 50);
  EXPECT_EQ(c.dmm.batch_size, 32);
  EXPECT_EQ(c.dmm.learning_rate, 0.001);
  EXPECT_EQ(c.montage.pairs.size(), 22u);
  EXPECT_EQ(c.bands.size(), 4u);
  EXPECT_EQ(c.labeled_sizes.back(), kAllLabeled);
  EXPECT_EQ(c.runs, 5);
}

TEST(Config, EchoRoundTrips) {
  const auto c = parse_run_config(std::string(R"({
    "seed": 11,
    "dmm": {"z_dim": 4, "epochs": 2, "aggregation": "last"},
    "experiment": {"labeled_sizes": [5, 10, "all"], "runs": 2},
    "montage": {"pairs": [["A", "B"]]},
    "bands": [{"name": "alpha", "low_hz": 8, "high_hz": 12}],
    "features": {"channel_average": true},
    "synth": {"train_per_class": 4, "steps": 10},
    "knn": {"hyper": {"k": 3, "metric": "manhattan"}, "tune_budget": 5},
    "paths": {"out": "o"}
  })"));
  const Json echo = to_json(c);
  const auto again = parse_run_config(echo);
  EXPECT_EQ(to_json(again), echo);
  EXPECT_EQ(again.dmm.aggregation, LatentAggregation::last);
  EXPECT_EQ(again.labeled_sizes, (std::vector<std::size_t>{5, 10, kAllLabeled}));
  EXPECT_EQ(again.knn.hyper.metric, KnnMetric::manhattan);
  EXPECT_EQ(*again.path("out"), "o");
  EXPECT_FALSE(again.path("model").has_value());
}

TEST(Config, StageSeedsDifferAndFollowSeed) {
  const auto a = parse_run_config(std::string(R"({"seed": 1})"));
  const auto b = parse_run_config(std::string(R"({"seed": 2})"));
  EXPECT_NE(a.dmm_seed(), a.experiment_seed());
  EXPECT_NE(a.synth_seed(0), a.synth_seed(1));
  EXPECT_NE(a.dmm_seed(), b.dmm_seed());
  EXPECT_EQ(a.dmm_config().seed, a.dmm_seed());
}

TEST(Config, HyperJson) {
  const KnnHyper h{7, KnnWeighting::inverse_distance, KnnMetric::manhattan};
  EXPECT_EQ(hyper_from_json(hyper_to_json(h)), h);
}
