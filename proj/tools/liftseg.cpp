// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: gen, run, oracle, eval, bench.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "liftseg/bench.hpp"
#include "liftseg/config.hpp"
#include "liftseg/error.hpp"
#include "liftseg/io.hpp"
#include "liftseg/pipeline.hpp"
#include "liftseg/synthetic.hpp"

namespace fs = std::filesystem;
using liftseg::ErrorKind;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Loading problems are the caller's fault; anything later is a runtime failure
// unless the stage itself rejected the configuration.
int exit_code(const liftseg::Error& e, bool loading) {
  if (loading) return kExitConfig;
  return e.kind() == ErrorKind::kConfig || e.kind() == ErrorKind::kValidation ? kExitConfig
                                                                              : kExitRuntime;
}

std::optional<bool> parse_toggle(const std::string& value) {
  if (value.empty()) return std::nullopt;
  return value == "on";
}

struct RunArgs {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string vsd;
  std::string mlf;
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--config", a.config, "pipeline config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--seed", a.seed, "override rng_seed");
  cmd->add_option("--toggle-vsd", a.vsd, "instance branch")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--toggle-mlf", a.mlf, "gated fusion")->check(CLI::IsMember({"on", "off"}));
}

int run_command(const RunArgs& a, liftseg::Backend backend) {
  liftseg::PipelineConfig config;
  liftseg::SceneData scene;
  try {
    config = liftseg::load_config(a.config);
    if (a.seed) config.rng_seed = *a.seed;
    if (auto v = parse_toggle(a.vsd)) config.enable_vsd = *v;
    if (auto v = parse_toggle(a.mlf)) config.enable_mlf = *v;
    config.validate();
    scene = liftseg::load_scene(config, fs::path(a.config).parent_path());
  } catch (const liftseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e, true);
  }
  try {
    const auto result = liftseg::run_pipeline(config, scene, backend);
    liftseg::write_outputs(a.out, result);
    std::cout << "wrote " << (fs::path(a.out) / "report.json").string() << "\n";
    if (result.evaluation)
      std::cout << "iou " << result.evaluation->per_record_iou.front() << "\n";
  } catch (const liftseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e, false);
  }
  return EXIT_SUCCESS;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Referring segmentation over lifted multi-view features"};
  app.require_subcommand(1);

  std::string gen_out = "fixture";
  std::string gen_spec;
  std::uint64_t gen_seed = 0;
  std::optional<std::vector<std::size_t>> gen_targets;
  bool gen_zero = false;
  auto* gen = app.add_subcommand("gen", "write a synthetic fixture");
  gen->add_option("--out", gen_out, "fixture directory");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--config", gen_spec, "scene spec JSON")->check(CLI::ExistingFile);
  gen->add_option("--targets", gen_targets, "target object ids")->delimiter(',');
  gen->add_flag("--zero-target", gen_zero, "no target object");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run the pipeline on a fixture");
  add_run_options(run, run_args);
  RunArgs oracle_args;
  auto* oracle = app.add_subcommand("oracle", "run the serial reference kernels");
  add_run_options(oracle, oracle_args);

  std::string eval_manifest;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "score saved masks");
  eval->add_option("--config", eval_manifest, "evaluation manifest JSON")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "directory for eval.json");

  std::size_t bench_points = 200000;
  std::size_t bench_queries = 1000;
  double bench_radius = 0.1;
  std::uint64_t bench_seed = 0;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "grid index vs brute-force radius queries");
  bench->add_option("--points", bench_points);
  bench->add_option("--queries", bench_queries);
  bench->add_option("--radius", bench_radius);
  bench->add_option("--seed", bench_seed);
  bench->add_option("--out", bench_out, "directory for bench.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*gen) {
    try {
      liftseg::SyntheticSceneSpec spec;
      if (!gen_spec.empty())
        spec = liftseg::scene_spec_from_json(nlohmann::json::parse(liftseg::io::read_file(gen_spec)));
      if (gen_targets) spec.targets = *gen_targets;
      if (gen_zero) spec.targets.clear();
      spec.validate();
      const auto config_path = liftseg::gen_fixtures(spec, gen_seed, gen_out);
      std::cout << "wrote " << config_path.string() << "\n";
    } catch (const liftseg::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return e.kind() == ErrorKind::kIo ? kExitRuntime : kExitConfig;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitConfig;
    }
    return EXIT_SUCCESS;
  }
  if (*run) return run_command(run_args, liftseg::Backend::kParallel);
  if (*oracle) return run_command(oracle_args, liftseg::Backend::kReference);
  if (*eval) {
    try {
      std::vector<double> thresholds;
      const auto report = liftseg::evaluate_manifest(eval_manifest, &thresholds);
      const auto doc = liftseg::to_json(report);
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        liftseg::io::write_file_atomic(fs::path(eval_out) / "eval.json", doc.dump(2) + "\n");
      }
      std::cout << doc["overall"].dump() << "\n";
    } catch (const liftseg::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return e.kind() == ErrorKind::kEmptyInput ? kExitRuntime : kExitConfig;
    }
    return EXIT_SUCCESS;
  }
  try {
    const auto report = liftseg::bench_index(bench_points, bench_queries, bench_radius, bench_seed);
    const auto doc = liftseg::to_json(report);
    if (!bench_out.empty()) {
      fs::create_directories(bench_out);
      liftseg::io::write_file_atomic(fs::path(bench_out) / "bench.json", doc.dump(2) + "\n");
    }
    std::cout << doc.dump(2) << "\n";
  } catch (const liftseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kConfig || e.kind() == ErrorKind::kSize ? kExitConfig
                                                                          : kExitRuntime;
  }
  return EXIT_SUCCESS;
}
