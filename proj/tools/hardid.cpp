#include "hardid/app.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace hardid;

  CLI::App app{"Inverse models for the two-term exponential hardening law"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GenDataOptions gen;
  std::string gen_config;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate space-filling train/test datasets");
  gen_cmd->add_option("--config", gen_config, "Config file (flat key = value)");
  gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--jobs", gen.jobs, "Worker threads")->check(CLI::PositiveNumber);
  gen_cmd->add_flag("--force", gen.force, "Overwrite existing files");

  BenchmarkOptions bench;
  std::string bench_config, kinds;
  std::size_t seeds = 0;
  int jobs = 0;
  bool no_models = false;
  auto* bench_cmd = app.add_subcommand("benchmark", "Train and score model instances over seeds");
  bench_cmd->add_option("--config", bench_config, "Config file (flat key = value)");
  bench_cmd->add_option("--train", bench.train_path, "Training dataset JSON");
  bench_cmd->add_option("--test", bench.test_path, "Test dataset JSON");
  bench_cmd->add_option("--out", bench.out_dir, "Output directory")->required();
  bench_cmd->add_option("--kinds", kinds, "Comma list of bad,good,ugly");
  bench_cmd->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--force", bench.force, "Overwrite existing files");
  bench_cmd->add_flag("--render-only", bench.render_only, "Re-render table.csv from an existing report");
  bench_cmd->add_flag("--no-models", no_models, "Do not write per-instance model files");

  PredictOptions pred;
  std::string curve_path, values;
  auto* pred_cmd = app.add_subcommand("predict", "Predict parameters for a curve");
  pred_cmd->add_option("--model", pred.model_path, "Model JSON")->required();
  auto* curve_opt = pred_cmd->add_option("--curve", curve_path, "Curve file (dataset JSON, JSON array or text)");
  auto* values_opt = pred_cmd->add_option("--values", values, "Inline stresses, comma separated");
  curve_opt->excludes(values_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*gen_cmd) {
    if (!gen_config.empty()) gen.config = gen_config;
    return cmdGenData(gen, std::cout, std::cerr);
  }
  if (*bench_cmd) {
    if (!bench_config.empty()) bench.config = bench_config;
    if (!kinds.empty()) bench.kinds = kinds;
    if (seeds > 0) bench.seeds = seeds;
    if (jobs > 0) bench.jobs = jobs;
    bench.save_models = !no_models;
    if (!bench.render_only && (bench.train_path.empty() || bench.test_path.empty())) {
      std::cerr << "usage error: benchmark needs --train and --test (or --render-only)\n";
      return kExitUsage;
    }
    return cmdBenchmark(bench, std::cout, std::cerr);
  }
  if (*pred_cmd) {
    if (!curve_path.empty()) pred.curve_path = curve_path;
    if (*values_opt) pred.values = values;
    return cmdPredict(pred, std::cout, std::cerr);
  }
  return kExitUsage;
}
