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

#include "gcrs/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#ifndef GCRS_COMMIT_ID
#define GCRS_COMMIT_ID "unknown"
#endif

namespace gcrs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) bad(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      bad("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(std::string("bad value for '") + key + "': " + e.what());
  }
}

void read_train(const json& j, TrainConfig& t) {
  check_keys(j,
             {"gamma", "gae_lambda", "clip_eps", "rpo_alpha", "learning_rate", "rollout_len",
              "epochs", "minibatches", "entropy_coef", "value_coef", "grad_clip_norm", "workers",
              "hidden", "log_std_init", "anneal_lr", "adam_eps"},
             "train");
  read(j, "gamma", t.gamma);
  read(j, "gae_lambda", t.gae_lambda);
  read(j, "clip_eps", t.clip_eps);
  read(j, "rpo_alpha", t.rpo_alpha);
  read(j, "learning_rate", t.learning_rate);
  read(j, "rollout_len", t.rollout_len);
  read(j, "epochs", t.epochs);
  read(j, "minibatches", t.minibatches);
  read(j, "entropy_coef", t.entropy_coef);
  read(j, "value_coef", t.value_coef);
  read(j, "grad_clip_norm", t.grad_clip_norm);
  read(j, "workers", t.workers);
  read(j, "hidden", t.hidden);
  read(j, "log_std_init", t.log_std_init);
  read(j, "anneal_lr", t.anneal_lr);
  read(j, "adam_eps", t.adam_eps);
}

json train_json(const TrainConfig& t) {
  return {{"gamma", t.gamma},
          {"gae_lambda", t.gae_lambda},
          {"clip_eps", t.clip_eps},
          {"rpo_alpha", t.rpo_alpha},
          {"learning_rate", t.learning_rate},
          {"rollout_len", t.rollout_len},
          {"epochs", t.epochs},
          {"minibatches", t.minibatches},
          {"entropy_coef", t.entropy_coef},
          {"value_coef", t.value_coef},
          {"grad_clip_norm", t.grad_clip_norm},
          {"workers", t.workers},
          {"hidden", t.hidden},
          {"log_std_init", t.log_std_init},
          {"anneal_lr", t.anneal_lr},
          {"adam_eps", t.adam_eps}};
}

}  // namespace

void ExperimentConfig::validate() const {
  if (run_name.empty() || run_name.find('/') != std::string::npos) bad("run_name must be a plain name");
  if (family.has_value() == !suite.empty()) bad("exactly one of family or suite is required");
  if (family) {
    const auto [lo, hi] = difficulty_range(*family);
    if (difficulty < lo || difficulty > hi) bad("difficulty out of range for the family");
  } else {
    (void)training_and_eval_distributions(suite, arena);
  }
  method.validate();
  train.validate();
  if (n_env_steps <= 0) bad("n_env_steps must be > 0");
  if (eval_every < 0) bad("eval_every must be >= 0");
  if (eval_episodes <= 0) bad("eval_episodes must be > 0");
  if (seeds.empty()) bad("seeds must not be empty");
  if (max_items < 0 || max_items > kMaxItems) bad("max_items must be in [0, 16]");
  if (max_doors < 0 || max_doors > kMaxDoors) bad("max_doors must be in [0, 15]");
  if (max_rooms < 1 || max_rooms > 64) bad("max_rooms must be in [1, 64]");
  if (cache_capacity < 1) bad("planner_cache_capacity must be >= 1");
}

ExperimentConfig parse_experiment_config(const json& j) {
  check_keys(j,
             {"run_name", "family", "difficulty", "suite", "arena", "abstraction",
              "subgoal_conditioning", "shaping", "train", "n_env_steps", "eval_every",
              "eval_episodes", "seeds", "output_dir", "record_wall_clock", "bootstrap_truncation",
              "observation", "planner_cache_capacity"},
             "config");
  ExperimentConfig c;
  read(j, "run_name", c.run_name);
  if (j.contains("family")) {
    try {
      c.family = parse_family(j.at("family").get<std::string>());
    } catch (const Error& e) {
      bad(e.what());
    } catch (const json::exception& e) {
      bad(std::string("bad value for 'family': ") + e.what());
    }
  }
  read(j, "difficulty", c.difficulty);
  read(j, "suite", c.suite);
  read(j, "arena", c.arena);
  std::string abstraction = "grid";
  read(j, "abstraction", abstraction);
  c.method.abstraction = parse_abstraction(abstraction);
  const bool none = c.method.abstraction == AbstractionChoice::None;
  c.method.subgoals = !none;
  c.method.shaping = !none;
  read(j, "subgoal_conditioning", c.method.subgoals);
  read(j, "shaping", c.method.shaping);
  if (j.contains("train")) read_train(j.at("train"), c.train);
  read(j, "n_env_steps", c.n_env_steps);
  read(j, "eval_every", c.eval_every);
  read(j, "eval_episodes", c.eval_episodes);
  read(j, "seeds", c.seeds);
  read(j, "output_dir", c.output_dir);
  read(j, "record_wall_clock", c.record_wall_clock);
  read(j, "bootstrap_truncation", c.bootstrap_truncation);
  if (j.contains("observation")) {
    const json& o = j.at("observation");
    check_keys(o, {"max_items", "max_doors", "max_rooms"}, "observation");
    read(o, "max_items", c.max_items);
    read(o, "max_doors", c.max_doors);
    read(o, "max_rooms", c.max_rooms);
  }
  read(j, "planner_cache_capacity", c.cache_capacity);
  try {
    c.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnknownSuite) bad(e.what());
    throw;
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) bad("cannot open config " + path);
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::exception& e) {
    bad("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_experiment_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j = {{"run_name", c.run_name},
            {"arena", c.arena},
            {"abstraction", std::string(to_string(c.method.abstraction))},
            {"subgoal_conditioning", c.method.subgoals},
            {"shaping", c.method.shaping},
            {"train", train_json(c.train)},
            {"n_env_steps", c.n_env_steps},
            {"eval_every", c.eval_every},
            {"eval_episodes", c.eval_episodes},
            {"seeds", c.seeds},
            {"output_dir", c.output_dir},
            {"record_wall_clock", c.record_wall_clock},
            {"bootstrap_truncation", c.bootstrap_truncation},
            {"observation",
             {{"max_items", c.max_items}, {"max_doors", c.max_doors}, {"max_rooms", c.max_rooms}}},
            {"planner_cache_capacity", c.cache_capacity}};
  if (c.family) {
    j["family"] = std::string(to_string(*c.family));
    j["difficulty"] = c.difficulty;
  } else {
    j["suite"] = c.suite;
  }
  return j;
}

std::uint64_t config_digest(const ExperimentConfig& c) {
  const std::string text = to_json(c).dump();
  return fnv1a(text.data(), text.size());
}

ExperimentTasks experiment_tasks(const ExperimentConfig& c) {
  ExperimentTasks t;
  if (c.family) {
    t.train = single_task_distribution(*c.family, c.difficulty, c.arena);
    t.eval.emplace_back(t.train.names.front(), t.train);
    return t;
  }
  auto [train, eval] = training_and_eval_distributions(c.suite, c.arena);
  t.train = std::move(train);
  for (std::size_t i = 0; i < eval.templates.size(); ++i) {
    t.eval.emplace_back(eval.names[i], TaskDistribution{{eval.templates[i]}, {eval.names[i]}});
  }
  return t;
}

std::string output_root(const ExperimentConfig& c) {
  if (const char* env = std::getenv("GCRS_OUT"); env != nullptr && *env != '\0') return env;
  return c.output_dir;
}

std::string seed_directory(const ExperimentConfig& c, std::uint64_t seed) {
  return (fs::path(output_root(c)) / c.run_name / ("seed_" + std::to_string(seed))).string();
}

std::string eval_line(const EvalRow& r) {
  return std::to_string(r.global_step) + ',' + r.distribution + ',' + format_double(r.success_rate) +
         ',' + format_double(r.mean_episode_len) + ',' + std::to_string(r.n_episodes) + ',' +
         std::to_string(r.seed);
}

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + p.string());
  return os;
}

}  // namespace

SeedRun run_seed(const ExperimentConfig& c, std::uint64_t seed, const std::string& dir) {
  const auto wall_start = std::chrono::steady_clock::now();
  const ExperimentTasks tasks = experiment_tasks(c);
  TrainerOptions opt;
  opt.learner = c.train;
  opt.method = c.method;
  opt.max_items = c.max_items;
  opt.max_doors = c.max_doors;
  opt.max_rooms = c.max_rooms;
  opt.total_steps = c.n_env_steps;
  opt.seed = seed;
  opt.record_wall_clock = c.record_wall_clock;
  opt.cache_capacity = c.cache_capacity;
  opt.bootstrap_truncation = c.bootstrap_truncation;

  std::ofstream metrics_os, eval_os;
  if (!dir.empty()) {
    fs::create_directories(dir);
    opt.dump_path = (fs::path(dir) / "nonfinite_minibatch.csv").string();
    metrics_os = open_out(fs::path(dir) / "metrics.csv");
    eval_os = open_out(fs::path(dir) / "eval.csv");
    metrics_os << kMetricsHeader << '\n';
    eval_os << kEvalHeader << '\n';
  }

  SeedRun run;
  Trainer trainer(tasks.train, opt);
  const std::uint64_t eval_seed = derive_seed(seed, 0xe7a1);
  auto run_evals = [&](std::int64_t step) {
    for (const auto& [name, dist] : tasks.eval) {
      const EvalResult r =
          evaluate(trainer.params(), trainer.layout(), c.method, dist, c.eval_episodes, eval_seed);
      EvalRow row{step, name, r.success_rate, r.mean_episode_len, r.episodes, seed};
      if (eval_os.is_open()) eval_os << eval_line(row) << '\n' << std::flush;
      run.evals.push_back(std::move(row));
    }
  };

  std::int64_t next_eval = c.eval_every > 0 ? c.eval_every : c.n_env_steps;
  trainer.run([&](const MetricsRow& row) {
    if (metrics_os.is_open()) metrics_os << metrics_line(row) << '\n' << std::flush;
    run.metrics.push_back(row);
    if (c.eval_every > 0 && row.global_step >= next_eval && !trainer.done()) {
      run_evals(row.global_step);
      while (next_eval <= row.global_step) next_eval += c.eval_every;
    }
  });
  run_evals(trainer.global_step());
  run.aborted_episodes = trainer.aborted_episodes();

  run.checkpoint.config_digest = config_digest(c);
  run.checkpoint.global_step = static_cast<std::uint64_t>(trainer.global_step());
  run.checkpoint.layout = trainer.layout();
  run.checkpoint.params = trainer.params();

  if (!dir.empty()) {
    save_checkpoint((fs::path(dir) / "final.ckpt").string(), run.checkpoint);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    std::ostringstream digest;
    digest << std::hex << run.checkpoint.config_digest;
    const json manifest = {{"run_name", c.run_name},
                           {"seed", seed},
                           {"config_digest", digest.str()},
                           {"commit", GCRS_COMMIT_ID},
                           {"wall_clock_s", c.record_wall_clock ? wall : 0.0},
                           {"global_step", trainer.global_step()},
                           {"aborted_episodes", run.aborted_episodes},
                           {"planner_solves", trainer.cache() ? trainer.cache()->stats().solves : 0},
                           {"config", to_json(c)}};
    open_out(fs::path(dir) / "manifest.json") << manifest.dump(2) << '\n';
  }
  return run;
}

int cli_train(const std::string& config_path, std::ostream& log) {
  ExperimentConfig c;
  try {
    c = load_experiment_config(config_path);
  } catch (const Error& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  }
  bool aborted = false;
  try {
    for (std::uint64_t seed : c.seeds) {
      const std::string dir = seed_directory(c, seed);
      log << "training " << c.run_name << " seed " << seed << " -> " << dir << '\n';
      const SeedRun run = run_seed(c, seed, dir);
      const auto& last = run.metrics.back();
      log << "  steps " << last.global_step << " episodes " << last.episodes << " success "
          << format_double(last.success_rate) << '\n';
      for (const auto& e : run.evals) {
        if (e.global_step == last.global_step) {
          log << "  eval " << e.distribution << " success " << format_double(e.success_rate) << '\n';
        }
      }
      if (run.aborted_episodes > 0) {
        log << "  " << run.aborted_episodes << " episode(s) aborted with NoPathToGoal\n";
        aborted = true;
      }
    }
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::InvalidConfig) return 2;
    if (e.code() == ErrorCode::NoPathToGoal) return 3;
    return 1;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
  return aborted ? 3 : 0;
}

std::vector<EvalRow> run_eval(const EvalRequest& req) {
  if (req.episodes <= 0) bad("episodes must be > 0");
  if (req.family.has_value() == !req.suite.empty()) bad("exactly one of --suite or --family is required");
  const Checkpoint ckpt = load_checkpoint(req.checkpoint);
  Method method;
  method.subgoals = ckpt.layout.subgoal_enabled;
  method.shaping = false;
  method.abstraction = ckpt.layout.kind == AbstractionKind::Room
                           ? (ckpt.layout.room_pos ? AbstractionChoice::RoomPos : AbstractionChoice::Room)
                           : AbstractionChoice::Grid;
  if (!method.subgoals) method.abstraction = AbstractionChoice::None;

  std::vector<std::pair<std::string, TaskDistribution>> dists;
  if (req.family) {
    if (req.difficulty_lo > req.difficulty_hi) bad("difficulty range is empty");
    for (int d = req.difficulty_lo; d <= req.difficulty_hi; ++d) {
      TaskDistribution dist = single_task_distribution(*req.family, d, req.arena);
      dists.emplace_back(dist.names.front(), std::move(dist));
    }
  } else {
    auto [train, eval] = training_and_eval_distributions(req.suite, req.arena);
    for (std::size_t i = 0; i < eval.templates.size(); ++i) {
      dists.emplace_back(eval.names[i], TaskDistribution{{eval.templates[i]}, {eval.names[i]}});
    }
  }
  std::vector<EvalRow> rows;
  for (const auto& [name, dist] : dists) {
    const EvalResult r = evaluate(ckpt.params, ckpt.layout, method, dist, req.episodes, req.seed);
    rows.push_back({static_cast<std::int64_t>(ckpt.global_step), name, r.success_rate,
                    r.mean_episode_len, r.episodes, req.seed});
  }
  return rows;
}

int cli_eval(const EvalRequest& req, std::ostream& out, std::ostream& log) {
  std::vector<EvalRow> rows;
  try {
    rows = run_eval(req);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::InvalidConfig:
      case ErrorCode::UnknownSuite:
      case ErrorCode::DifficultyOutOfRange: return 2;
      case ErrorCode::CheckpointMismatch: return 4;
      default: return 1;
    }
  }
  std::ofstream file;
  std::ostream* os = &out;
  if (!req.output.empty()) {
    file.open(req.output, std::ios::trunc);
    if (!file) {
      log << "error: cannot write " << req.output << '\n';
      return 1;
    }
    os = &file;
  }
  *os << kEvalHeader << '\n';
  for (const auto& r : rows) *os << eval_line(r) << '\n';
  return 0;
}

std::vector<Aggregate> aggregate_series(const std::vector<Series>& seeds) {
  std::vector<Aggregate> out;
  if (seeds.empty()) return out;
  std::size_t base = 0;
  for (std::size_t s = 1; s < seeds.size(); ++s) {
    if (seeds[s].size() < seeds[base].size()) base = s;
  }
  for (const SeriesPoint& p : seeds[base]) {
    const std::size_t width = p.values.size();
    Aggregate a{p.step, std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)};
    std::vector<const SeriesPoint*> matched;
    for (const Series& s : seeds) {
      if (s.empty()) continue;
      const auto it = std::min_element(s.begin(), s.end(), [&](const SeriesPoint& x, const SeriesPoint& y) {
        return std::llabs(x.step - p.step) < std::llabs(y.step - p.step);
      });
      matched.push_back(&*it);
    }
    const double n = static_cast<double>(matched.size());
    for (std::size_t k = 0; k < width; ++k) {
      // Shifted by the first seed so identical seeds give exactly zero spread.
      const double x0 = matched.front()->values[k];
      double sum = 0.0, sq = 0.0;
      for (const auto* m : matched) {
        const double d = m->values[k] - x0;
        sum += d;
        sq += d * d;
      }
      const double mean_d = sum / n;
      a.mean[k] = x0 + mean_d;
      a.std_dev[k] = std::sqrt(std::max(0.0, sq / n - mean_d * mean_d));
    }
    out.push_back(std::move(a));
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_csv(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + p.string());
  Table t;
  std::string line;
  if (std::getline(is, line)) t.header = split_csv(line);
  while (std::getline(is, line)) {
    if (!line.empty()) t.rows.push_back(split_csv(line));
  }
  return t;
}

void write_aggregate(std::ostream& os, const std::vector<std::string>& names,
                     const std::vector<Aggregate>& agg, std::size_t n_seeds,
                     const std::string& prefix = "", const std::string& prefix_value = "") {
  for (const auto& a : agg) {
    if (!prefix.empty()) os << prefix_value << ',';
    os << a.step << ',' << n_seeds;
    for (std::size_t k = 0; k < names.size(); ++k) {
      os << ',' << format_double(a.mean[k]) << ',' << format_double(a.std_dev[k]);
    }
    os << '\n';
  }
}

}  // namespace

int cli_plot_data(const std::string& run_dir, std::ostream& out, std::ostream& log) {
  try {
    std::vector<fs::path> seed_dirs;
    if (fs::is_directory(run_dir)) {
      for (const auto& entry : fs::directory_iterator(run_dir)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0 &&
            fs::exists(entry.path() / "metrics.csv")) {
          seed_dirs.push_back(entry.path());
        }
      }
    }
    std::sort(seed_dirs.begin(), seed_dirs.end());
    if (seed_dirs.empty()) {
      log << "error: no seed_*/metrics.csv under " << run_dir << '\n';
      return 2;
    }

    const std::vector<std::string> metric_names{"success_rate", "mean_raw_return",
                                                "mean_shaped_return", "mean_episode_len"};
    std::vector<Series> metric_series;
    std::map<std::string, std::vector<Series>> eval_series;
    for (const auto& dir : seed_dirs) {
      const Table t = read_csv(dir / "metrics.csv");
      std::vector<std::size_t> cols;
      for (const auto& name : metric_names) {
        const auto it = std::find(t.header.begin(), t.header.end(), name);
        if (it == t.header.end()) throw Error(ErrorCode::Io, "metrics.csv lacks column " + name);
        cols.push_back(static_cast<std::size_t>(it - t.header.begin()));
      }
      Series s;
      for (const auto& row : t.rows) {
        SeriesPoint p{std::stoll(row.at(0)), {}};
        for (std::size_t c : cols) p.values.push_back(std::stod(row.at(c)));
        s.push_back(std::move(p));
      }
      metric_series.push_back(std::move(s));

      if (fs::exists(dir / "eval.csv")) {
        const Table e = read_csv(dir / "eval.csv");
        std::map<std::string, Series> per_dist;
        for (const auto& row : e.rows) {
          per_dist[row.at(1)].push_back({std::stoll(row.at(0)), {std::stod(row.at(2)), std::stod(row.at(3))}});
        }
        for (auto& [name, series] : per_dist) eval_series[name].push_back(std::move(series));
      }
    }

    const fs::path plot_path = fs::path(run_dir) / "plot_data.csv";
    std::ofstream plot = open_out(plot_path);
    std::ostringstream header;
    header << "global_step,n_seeds";
    for (const auto& n : metric_names) header << ',' << n << "_mean," << n << "_std";
    plot << header.str() << '\n';
    out << header.str() << '\n';
    std::ostringstream body;
    write_aggregate(body, metric_names, aggregate_series(metric_series), seed_dirs.size());
    plot << body.str();
    out << body.str();

    if (!eval_series.empty()) {
      std::ofstream eplot = open_out(fs::path(run_dir) / "eval_plot_data.csv");
      eplot << "distribution,global_step,n_seeds,success_rate_mean,success_rate_std,"
               "mean_episode_len_mean,mean_episode_len_std\n";
      for (const auto& [name, series] : eval_series) {
        write_aggregate(eplot, {"success_rate", "mean_episode_len"}, aggregate_series(series),
                        series.size(), "distribution", name);
      }
    }
    log << "wrote " << plot_path.string() << '\n';
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace gcrs
