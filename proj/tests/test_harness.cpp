// Copyright 2026 The GCRS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gcrs/error.hpp"
#include "gcrs/harness.hpp"

namespace gcrs {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gcrs_harness_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json tiny_config(const fs::path& out) {
  return {{"run_name", "tiny"},
          {"family", "UMaze"},
          {"difficulty", 2},
          {"train", {{"rollout_len", 32}, {"workers", 2}, {"minibatches", 2}, {"epochs", 1}}},
          {"n_env_steps", 256},
          {"eval_every", 128},
          {"eval_episodes", 2},
          {"seeds", {0}},
          {"output_dir", out.string()},
          {"record_wall_clock", false}};
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

ErrorCode parse_error(const json& j) {
  try {
    parse_experiment_config(j);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "config accepted: " << j.dump();
  return ErrorCode::Io;
}

TEST(Config, Defaults) {
  const ExperimentConfig c = parse_experiment_config({{"family", "doorkey"}, {"difficulty", 6}});
  EXPECT_EQ(c.family, Family::DoorKey);
  EXPECT_EQ(c.method.abstraction, AbstractionChoice::Grid);
  EXPECT_TRUE(c.method.subgoals);
  EXPECT_TRUE(c.method.shaping);
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{0});
}

TEST(Config, NoneDisablesSubgoalsAndShaping) {
  const ExperimentConfig c =
      parse_experiment_config({{"family", "UMaze"}, {"difficulty", 3}, {"abstraction", "none"}});
  EXPECT_FALSE(c.method.subgoals);
  EXPECT_FALSE(c.method.shaping);
}

TEST(Config, Rejections) {
  EXPECT_EQ(parse_error({{"family", "UMaze"}, {"colour", 1}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"family", "UMaze"}, {"train", {{"lr", 0.1}}}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"family", "UMaze"}, {"abstraction", "none"}, {"shaping", true}}),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"suite", "nope"}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"family", "UMaze"}, {"suite", "multigoal"}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"family", "Tetris"}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"family", "UMaze"}, {"seeds", json::array()}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"family", "UMaze"}, {"n_env_steps", 0}}), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_error({{"family", "UMaze"}, {"train", {{"gamma", 1.5}}}}), ErrorCode::InvalidConfig);
}

TEST(Config, JsonRoundTrip) {
  const ExperimentConfig a = parse_experiment_config(tiny_config("/tmp/x"));
  const ExperimentConfig b = parse_experiment_config(to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(config_digest(a), config_digest(b));
  ExperimentConfig c = a;
  c.train.learning_rate *= 2;
  EXPECT_NE(config_digest(a), config_digest(c));
}

TEST(Config, SuiteTasks) {
  const ExperimentConfig c = parse_experiment_config({{"suite", "multigoal"}, {"arena", 7}});
  const ExperimentTasks t = experiment_tasks(c);
  EXPECT_EQ(t.train.templates.size(), 4u);
  ASSERT_EQ(t.eval.size(), 2u);
  EXPECT_EQ(t.eval[0].first, "SimpleCrossing-2@7");
  EXPECT_EQ(t.eval[1].first, "SimpleCrossing-3@7");
}

TEST(CliTrain, WritesArtifacts) {
  const fs::path dir = fresh_dir("artifacts");
  std::ostringstream log;
  ASSERT_EQ(cli_train(write_config(dir, tiny_config(dir / "runs")).string(), log), 0) << log.str();
  const fs::path seed = dir / "runs" / "tiny" / "seed_0";
  for (const char* f : {"metrics.csv", "eval.csv", "final.ckpt", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(seed / f)) << f;
  }
  const std::string metrics = slurp(seed / "metrics.csv");
  EXPECT_EQ(metrics.rfind("global_step,", 0), 0u);
  const json manifest = json::parse(slurp(seed / "manifest.json"));
  EXPECT_TRUE(manifest.contains("config"));
  const Checkpoint ck = load_checkpoint((seed / "final.ckpt").string());
  EXPECT_EQ(ck.global_step, 256u);
  EXPECT_EQ(ck.config_digest, config_digest(parse_experiment_config(tiny_config(dir / "runs"))));
}

TEST(CliTrain, BadConfigExitsTwo) {
  const fs::path dir = fresh_dir("bad");
  json j = tiny_config(dir);
  j["unknown_key"] = 1;
  std::ostringstream log;
  EXPECT_EQ(cli_train(write_config(dir, j).string(), log), 2);
  EXPECT_EQ(cli_train((dir / "missing.json").string(), log), 2);
}

TEST(CliTrain, DeterministicMetrics) {
  std::string first;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = fresh_dir("det" + std::to_string(run));
    std::ostringstream log;
    ASSERT_EQ(cli_train(write_config(dir, tiny_config(dir / "runs")).string(), log), 0);
    const std::string m = slurp(dir / "runs" / "tiny" / "seed_0" / "metrics.csv") +
                          slurp(dir / "runs" / "tiny" / "seed_0" / "eval.csv");
    if (run == 0) first = m;
    else EXPECT_EQ(first, m);
  }
}

class EvalFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const fs::path dir = fresh_dir("eval");
    json j = tiny_config(dir / "runs");
    j["family"] = "SimpleCrossing";
    j["difficulty"] = 1;
    std::ostringstream log;
    ASSERT_EQ(cli_train(write_config(dir, j).string(), log), 0) << log.str();
    ckpt_ = (dir / "runs" / "tiny" / "seed_0" / "final.ckpt").string();
  }
  static std::string ckpt_;
};
std::string EvalFixture::ckpt_;

TEST_F(EvalFixture, FamilyRange) {
  EvalRequest r;
  r.checkpoint = ckpt_;
  r.family = Family::UMaze;
  r.difficulty_lo = 2;
  r.difficulty_hi = 4;
  r.episodes = 2;
  const auto rows = run_eval(r);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].distribution, "UMaze-2");
  EXPECT_EQ(rows[2].distribution, "UMaze-4");
  for (const auto& row : rows) {
    EXPECT_EQ(row.n_episodes, 2);
    EXPECT_GE(row.success_rate, 0.0);
    EXPECT_LE(row.success_rate, 1.0);
  }
  EXPECT_EQ(run_eval(r)[1].mean_episode_len, rows[1].mean_episode_len);
}

TEST_F(EvalFixture, SuiteUsesHeldOutTemplates) {
  EvalRequest r;
  r.checkpoint = ckpt_;
  r.suite = "multigoal";
  r.arena = 7;
  r.episodes = 1;
  const auto rows = run_eval(r);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].distribution, "SimpleCrossing-2@7");
  EXPECT_EQ(rows[1].distribution, "SimpleCrossing-3@7");
}

TEST_F(EvalFixture, CliErrors) {
  std::ostringstream out, log;
  EvalRequest r;
  r.checkpoint = ckpt_;
  r.family = Family::UMaze;
  r.episodes = 0;
  EXPECT_EQ(cli_eval(r, out, log), 2);
  r.episodes = 1;
  r.suite = "multigoal";
  EXPECT_EQ(cli_eval(r, out, log), 2);
  r.suite.clear();
  r.checkpoint = "/nonexistent/ckpt";
  EXPECT_NE(cli_eval(r, out, log), 0);
}

TEST_F(EvalFixture, CliWritesCsv) {
  std::ostringstream out, log;
  EvalRequest r;
  r.checkpoint = ckpt_;
  r.family = Family::UMaze;
  r.difficulty_lo = r.difficulty_hi = 3;
  r.episodes = 1;
  ASSERT_EQ(cli_eval(r, out, log), 0) << log.str();
  EXPECT_EQ(out.str().rfind(kEvalHeader, 0), 0u);
  EXPECT_NE(out.str().find(",UMaze-3,"), std::string::npos);
}

TEST(Aggregate, SingleSeedHasZeroStd) {
  const Series s{{10, {0.5, 1.0}}, {20, {0.7, 2.0}}};
  const auto a = aggregate_series({s});
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[1].step, 20);
  EXPECT_EQ(a[1].mean, (std::vector<double>{0.7, 2.0}));
  EXPECT_EQ(a[1].std_dev, (std::vector<double>{0.0, 0.0}));
}

TEST(Aggregate, MeanAndPopulationStd) {
  const Series a{{100, {0.8}}};
  const Series b{{100, {1.0}}};
  const auto r = aggregate_series({a, b});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0].mean[0], 0.9, 1e-12);
  EXPECT_NEAR(r[0].std_dev[0], 0.1, 1e-12);
  const auto same = aggregate_series({a, a, a});
  EXPECT_EQ(same[0].std_dev[0], 0.0);
}

TEST(Aggregate, MisalignedSeedsUseShortestGrid) {
  const Series a{{100, {1.0}}, {200, {2.0}}, {300, {3.0}}};
  const Series b{{110, {5.0}}, {290, {7.0}}};
  const auto r = aggregate_series({a, b});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].step, 110);
  EXPECT_NEAR(r[0].mean[0], 3.0, 1e-12);
  EXPECT_NEAR(r[1].mean[0], 5.0, 1e-12);
}

TEST(PlotData, AggregatesSeedDirectories) {
  const fs::path dir = fresh_dir("plot");
  json j = tiny_config(dir / "runs");
  j["seeds"] = {0, 1};
  std::ostringstream log;
  ASSERT_EQ(cli_train(write_config(dir, j).string(), log), 0) << log.str();
  std::ostringstream out;
  const fs::path run = dir / "runs" / "tiny";
  ASSERT_EQ(cli_plot_data(run.string(), out, log), 0) << log.str();
  EXPECT_EQ(out.str().rfind("global_step,n_seeds,success_rate_mean,success_rate_std", 0), 0u);
  EXPECT_TRUE(fs::exists(run / "plot_data.csv"));
  EXPECT_TRUE(fs::exists(run / "eval_plot_data.csv"));
  EXPECT_EQ(cli_plot_data((dir / "empty").string(), out, log), 2);
}

}  // namespace
}  // namespace gcrs
