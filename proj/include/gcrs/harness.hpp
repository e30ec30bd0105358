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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gcrs/checkpoint.hpp"
#include "gcrs/shaping.hpp"

namespace gcrs {

/// One experiment: what to train on, which method, and for how long.
/// Either `family` (with `difficulty`) or `suite` names the tasks.
struct ExperimentConfig {
  std::string run_name = "run";
  std::optional<Family> family;
  int difficulty = 1;
  std::string suite;
  int arena = 0;
  Method method;
  TrainConfig train;
  std::int64_t n_env_steps = 100000;
  std::int64_t eval_every = 0;  // 0: evaluate once at the end
  int eval_episodes = 100;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";
  bool record_wall_clock = true;
  bool bootstrap_truncation = true;
  int max_items = 4;
  int max_doors = 1;
  int max_rooms = 4;
  std::size_t cache_capacity = 512;

  /// Throws InvalidConfig.
  void validate() const;
};

/// Parses and validates; unknown keys are rejected. Throws InvalidConfig.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& c);
std::uint64_t config_digest(const ExperimentConfig& c);

/// Training distribution and the named evaluation distributions (one per
/// held-out template for suites, the training task itself otherwise).
struct ExperimentTasks {
  TaskDistribution train;
  std::vector<std::pair<std::string, TaskDistribution>> eval;
};
ExperimentTasks experiment_tasks(const ExperimentConfig& c);

/// GCRS_OUT if set, else the configured output_dir.
std::string output_root(const ExperimentConfig& c);
std::string seed_directory(const ExperimentConfig& c, std::uint64_t seed);

struct EvalRow {
  std::int64_t global_step = 0;
  std::string distribution;
  double success_rate = 0.0;
  double mean_episode_len = 0.0;
  int n_episodes = 0;
  std::uint64_t seed = 0;
};
inline constexpr const char* kEvalHeader =
    "global_step,distribution,success_rate,mean_episode_len,n_episodes,seed";
std::string eval_line(const EvalRow& row);

struct SeedRun {
  std::vector<MetricsRow> metrics;
  std::vector<EvalRow> evals;
  std::int64_t aborted_episodes = 0;
  Checkpoint checkpoint;
};

/// Trains one seed. When `dir` is non-empty, writes metrics.csv, eval.csv,
/// final.ckpt, and manifest.json there.
SeedRun run_seed(const ExperimentConfig& c, std::uint64_t seed, const std::string& dir);

/// Exit codes: 0 success, 1 I/O or runtime failure, 2 configuration error,
/// 3 a training task hit NoPathToGoal.
int cli_train(const std::string& config_path, std::ostream& log);

struct EvalRequest {
  std::string checkpoint;
  std::string suite;
  std::optional<Family> family;
  int difficulty_lo = 1;
  int difficulty_hi = 1;
  int arena = 0;
  int episodes = 100;
  std::uint64_t seed = 0;
  std::string output;  // CSV path; empty writes to the stream
};

std::vector<EvalRow> run_eval(const EvalRequest& req);
int cli_eval(const EvalRequest& req, std::ostream& out, std::ostream& log);

/// Mean and population standard deviation across seeds, aligned on
/// global_step. Misaligned grids are resampled onto the seed with the fewest
/// rows, matching each step to the nearest recorded step of every other seed.
struct SeriesPoint {
  std::int64_t step = 0;
  std::vector<double> values;
};
using Series = std::vector<SeriesPoint>;
struct Aggregate {
  std::int64_t step = 0;
  std::vector<double> mean;
  std::vector<double> std_dev;
};
std::vector<Aggregate> aggregate_series(const std::vector<Series>& seeds);

int cli_plot_data(const std::string& run_dir, std::ostream& out, std::ostream& log);

}  // namespace gcrs
