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

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "gcrs/checkpoint.hpp"
#include "gcrs/harness.hpp"
#include "gcrs/planner.hpp"
#include "gcrs/world.hpp"

namespace {

using namespace gcrs;

std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    const int d = std::stoi(text);
    return {d, d};
  }
  return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
}

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int plan_debug(const std::string& map_path, const std::string& abstraction,
               const std::string& family) {
  MapOptions opt;
  if (!family.empty()) {
    opt.family = parse_family(family);
    opt.infer_family = false;
  }
  const WorldSpec spec = parse_map(read_file(map_path), opt);
  const AbstractModel model(spec, abstraction_kind(parse_abstraction(abstraction)));
  const AbstractState s0 = model.phi(reset(spec, 0));
  const PlanSolution sol = solve(model, s0);
  std::cout << "root " << canonical_string(s0) << " V*=" << format_double(sol.value(s0)) << '\n';
  int i = 0;
  for (const auto& step : sol.plan_from(s0)) {
    std::cout << ++i << ' ' << to_string(step.action) << ' ' << canonical_string(step.next)
              << " V*=" << format_double(sol.value(step.next)) << '\n';
  }
  std::cout << "expanded " << sol.expanded << " states " << sol.nodes.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-conditioned reward shaping lab"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train every seed of an experiment config");
  train->add_option("config", config_path, "JSON experiment config")->required();

  EvalRequest req;
  std::string family, difficulty = "1";
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with the deterministic policy");
  eval->add_option("--ckpt", req.checkpoint, "Checkpoint path")->required();
  auto* suite_opt = eval->add_option("--suite", req.suite, "Held-out suite (multigoal, objectcolors)");
  auto* family_opt = eval->add_option("--family", family, "Task family");
  suite_opt->excludes(family_opt);
  eval->add_option("--difficulty", difficulty, "Difficulty or range a..b");
  eval->add_option("--arena", req.arena, "Arena size (0: family default)");
  eval->add_option("--episodes", req.episodes, "Episodes per row");
  eval->add_option("--seed", req.seed, "Evaluation seed");
  eval->add_option("--out", req.output, "Write the report CSV here");

  std::string map_path, abstraction = "grid", map_family;
  auto* plan = app.add_subcommand("plan-debug", "Print the abstract plan for a map file");
  plan->add_option("map", map_path, "Map file")->required();
  plan->add_option("--abstraction", abstraction, "grid or room");
  plan->add_option("--family", map_family, "Override the inferred family");

  std::string gen_family;
  int gen_difficulty = 1, gen_arena = 0;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen-map", "Generate a task and print its map");
  gen->add_option("--family", gen_family, "Task family")->required();
  gen->add_option("--difficulty", gen_difficulty, "Difficulty");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--arena", gen_arena, "Arena size (0: family default)");

  std::string run_dir;
  auto* plot = app.add_subcommand("plot-data", "Aggregate seeds of a run into mean/std CSV");
  plot->add_option("dir", run_dir, "Run directory containing seed_*")->required();

  std::string ckpt_path;
  auto* describe = app.add_subcommand("describe-checkpoint", "Print checkpoint shapes and digests");
  describe->add_option("path", ckpt_path, "Checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cli_train(config_path, std::cerr);
    if (*eval) {
      if (!family.empty()) req.family = parse_family(family);
      std::tie(req.difficulty_lo, req.difficulty_hi) = parse_range(difficulty);
      return cli_eval(req, std::cout, std::cerr);
    }
    if (*plan) return plan_debug(map_path, abstraction, map_family);
    if (*gen) {
      TaskDescriptor t;
      t.family = parse_family(gen_family);
      t.difficulty = gen_difficulty;
      t.seed = gen_seed;
      t.arena = gen_arena;
      const WorldSpec spec = generate_task(t);
      std::cout << render_map(spec) << '\n';
      return 0;
    }
    if (*plot) return cli_plot_data(run_dir, std::cout, std::cerr);
    if (*describe) {
      std::cout << describe_checkpoint(load_checkpoint(ckpt_path));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::InvalidConfig:
      case ErrorCode::DifficultyOutOfRange:
      case ErrorCode::UnknownSuite: return 2;
      case ErrorCode::NoPathToGoal: return 3;
      case ErrorCode::CheckpointMismatch: return 4;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
