#pragma once

// Command implementations behind the `hardid` executable. Each returns the
// process exit code: 0 success, 1 usage/config error, 2 runtime failure.

#include "hardid/config.hpp"
#include "hardid/dataset.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hardid {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

/// Train set by maximin selection, then the test set selected with the train
/// points treated as already chosen.
std::pair<Dataset, Dataset> generateDatasets(const AppConfig& cfg, int jobs);

struct GenDataOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out_dir;
  bool force = false;
  int jobs = 1;
};

/// Writes train.json, test.json and manifest.json into out_dir.
int cmdGenData(const GenDataOptions& opts, std::ostream& out, std::ostream& err);

struct BenchmarkOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::filesystem::path out_dir;
  std::optional<std::string> kinds;  // comma list overriding the config
  std::optional<std::size_t> seeds;  // seed count overriding the config
  std::optional<int> jobs;
  bool force = false;
  bool render_only = false;
  bool save_models = true;
};

/// Writes report.json, table.csv, manifest.json and models/<kind>_seed<k>.json
/// into out_dir. With render_only, re-validates out_dir/report.json and
/// re-renders table.csv without training.
int cmdBenchmark(const BenchmarkOptions& opts, std::ostream& out, std::ostream& err);

struct PredictOptions {
  std::filesystem::path model_path;
  std::optional<std::filesystem::path> curve_path;  // dataset JSON, JSON array or whitespace text
  std::optional<std::string> values;                // inline comma/space separated stresses
};

int cmdPredict(const PredictOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace hardid
