#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mcl/config.hpp"

using namespace mcl;
using nlohmann::json;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(MCL_SOURCE_DIR) / "configs";

json minimal() {
  return json::parse(R"({
    "study": "single",
    "problem": {"family": "quadratic", "centers": [[0.0], [1.0], [5.0]]},
    "algo": {"aggregation": "median", "step_size": {"kind": "constant", "delta": 0.001}, "T": 10}
  })");
}

std::string error_path(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<accepted>";
}

}  // namespace

TEST(Config, PresetsRoundTrip) {
  int seen = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kConfigs)) {
    const ExperimentConfig c = load_config(entry.path());
    EXPECT_EQ(parse_config(to_json(c)), c) << entry.path();
    EXPECT_EQ(parse_config(json::parse(to_json(c).dump())), c) << entry.path();
    ++seen;
  }
  EXPECT_GE(seen, 5);
}

TEST(Config, Defaults) {
  const ExperimentConfig c = parse_config(minimal());
  EXPECT_EQ(c.output_dir, "runs");
  ASSERT_TRUE(c.algo);
  EXPECT_EQ(c.algo->x0, (Vector{0.0}));
  EXPECT_EQ(c.algo->gradient.mode, GradientMode::Exact);
  EXPECT_FALSE(c.algo->noise);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1}));
}

TEST(Config, RepetitionsExpandSeeds) {
  json j = minimal();
  j["algo"]["seed"] = 7;
  j["repetitions"] = 3;
  EXPECT_EQ(parse_config(j).seeds, (std::vector<std::uint64_t>{7, 8, 9}));
  j["seeds"] = {4, 2};
  EXPECT_EQ(error_path(j), "repetitions");
  j.erase("repetitions");
  EXPECT_EQ(parse_config(j).seeds, (std::vector<std::uint64_t>{4, 2}));
}

TEST(Config, UnknownKeysAreRejected) {
  json j = minimal();
  j["algo"]["momentum"] = 0.9;
  EXPECT_EQ(error_path(j), "algo.momentum");
  j = minimal();
  j["extra"] = true;
  EXPECT_EQ(error_path(j), "extra");
  j = minimal();
  j["algo"]["step_size"]["warmup"] = 3;
  EXPECT_EQ(error_path(j), "algo.step_size.warmup");
}

TEST(Config, MissingFieldsAreNamed) {
  json j = minimal();
  j["algo"].erase("aggregation");
  try {
    parse_config(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "algo.aggregation");
    EXPECT_NE(std::string(e.what()).find("algo.aggregation"), std::string::npos);
  }
  j = minimal();
  j["algo"].erase("T");
  EXPECT_EQ(error_path(j), "algo.T");
  j = minimal();
  j.erase("problem");
  EXPECT_EQ(error_path(j), "problem");
}

TEST(Config, ModulePreconditionsAreCheckedUpFront) {
  json j = minimal();
  j["problem"]["centers"] = {{0.0}, {1.0}};
  j["algo"]["aggregation"] = "sign_majority_vote";
  EXPECT_EQ(error_path(j), "algo.aggregation");

  j = minimal();
  j["algo"]["x0"] = {1.0, 2.0};
  EXPECT_EQ(error_path(j), "algo.x0");

  j = minimal();
  j["algo"]["gradient_mode"] = {{"kind", "minibatch"}, {"batch_size", 4}};
  EXPECT_EQ(error_path(j), "algo.gradient_mode");

  j = minimal();
  j["noise"] = {{"family", "gaussian"}, {"b", -1.0}};
  EXPECT_EQ(error_path(j), "noise.b");

  j = minimal();
  j["noise"] = {{"family", "cauchy"}, {"b", 1.0}};
  EXPECT_EQ(error_path(j), "noise.family");

  j = minimal();
  j["algo"]["step_size"]["delta"] = 0.0;
  EXPECT_EQ(error_path(j), "algo.step_size.delta");

  j = minimal();
  j["algo"]["T"] = -5;
  EXPECT_EQ(error_path(j), "algo.T");

  j = minimal();
  j["study"] = "sweep";
  EXPECT_EQ(error_path(j), "sweep");
}

TEST(Config, MalformedJsonReportsTheLine) {
  const auto path = std::filesystem::temp_directory_path() / "mcl_bad_config.json";
  {
    std::ofstream out(path);
    out << "{\n  \"study\": \"single\",\n  \"problem\": [1, 2,\n}\n";
  }
  try {
    load_config(path);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, MedianLabStudy) {
  const json j = json::parse(R"({
    "study": "medianlab",
    "medianlab": {"u": [0, 1, 5], "families": ["gaussian", "uniform"], "b_grid": [4, 8, 16, 32]}
  })");
  const ExperimentConfig c = parse_config(j);
  ASSERT_TRUE(c.medianlab);
  EXPECT_EQ(c.medianlab->families.size(), 2u);
  EXPECT_FALSE(c.algo);
  json even = j;
  even["medianlab"]["u"] = {0, 1};
  EXPECT_EQ(error_path(even), "medianlab.u");
  json stray = j;
  stray["algo"] = minimal()["algo"];
  EXPECT_EQ(error_path(stray), "algo");
}

TEST(Config, BuildProblem) {
  const auto q = build_problem(*parse_config(minimal()).problem);
  EXPECT_EQ(q->num_workers(), 3u);
  ProblemSpec p;
  p.family = ProblemFamily::Logistic;
  p.logistic.workers = 3;
  const auto l = build_problem(p);
  EXPECT_EQ(l->num_workers(), 3u);
  EXPECT_TRUE(l->supports_minibatch());
}
