#pragma once

#include "hardid/curve_metric.hpp"
#include "hardid/dataset.hpp"
#include "hardid/dense_net.hpp"
#include "hardid/models.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace hardid {

enum class StdMode { Population, Sample };

struct TrainConfig {
  int epochs = 500;
  int batch_size = 32;
  AdamConfig adam;
  std::vector<std::uint64_t> seeds;  // default: 0 .. 19
  std::vector<ModelKind> kinds{kAllModelKinds.begin(), kAllModelKinds.end()};
  QuadratureSpec quad;
  StdMode std_mode = StdMode::Population;

  TrainConfig();
  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
};

nlohmann::json trainConfigToJson(const TrainConfig& cfg);

struct TrainResult {
  InverseModel model;
  std::vector<double> epoch_losses;  // mean loss per sample, per epoch
  std::int64_t updates = 0;
  bool failed = false;
  std::string diagnostic;
};

/// Seeded mini-batch Adam training of one model instance. A non-finite loss
/// or parameter stops training and marks the result failed.
TrainResult trainInstance(ModelKind kind, const Dataset& train, const TrainConfig& cfg,
                          std::uint64_t seed);

/// Curve distance between each test label and its prediction (one column of
/// `predictions` per test record).
std::vector<double> predictionErrors(const MatrixXd& predictions, const Dataset& test,
                                     const QuadratureSpec& quad);

/// Mean over the test set of the curve distance to the prediction's curve.
double meanPredError(const InverseModel& model, const Dataset& test, const QuadratureSpec& quad);
/// Maximum over the test set of the same distance.
double maxPredError(const InverseModel& model, const Dataset& test, const QuadratureSpec& quad);

struct InstanceResult {
  ModelKind kind = ModelKind::Bad;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string failure;
  double first_loss = 0.0;
  double final_loss = 0.0;
  double delta = 0.0;      // mean prediction error
  double delta_max = 0.0;  // maximum prediction error
  double wall_seconds = 0.0;
  std::uint64_t param_fingerprint = 0;  // hash of the trained weights
};

struct Aggregates {
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  double mean_delta = 0.0;
  double mean_delta_max = 0.0;
  double std_delta = 0.0;
  double std_delta_max = 0.0;
  double min_delta = 0.0;
  double min_delta_max = 0.0;

  friend bool operator==(const Aggregates&, const Aggregates&) = default;
};

/// The six summary statistics over the successful instances, in input order.
Aggregates aggregate(const std::vector<InstanceResult>& instances, StdMode mode);

struct BenchmarkReport {
  nlohmann::json config;
  std::vector<InstanceResult> instances;  // grouped by kind, then seed order
  std::map<ModelKind, Aggregates> aggregates;

  std::vector<InstanceResult> instancesOf(ModelKind kind) const;
};

using InstanceSink = std::function<void(const InstanceResult&, const InverseModel&)>;

/// Trains every (kind, seed) pair on up to `jobs` threads and aggregates per
/// kind. `sink`, if set, sees each finished instance (from worker threads).
BenchmarkReport runBenchmark(const TrainConfig& cfg, const Dataset& train, const Dataset& test,
                             int jobs = 1, const InstanceSink& sink = {});

/// Config, instances and aggregates, plus wall times under "timing" when
/// requested. Without timing the document is a deterministic function of
/// the config, seeds and data.
nlohmann::json reportToJson(const BenchmarkReport& report, bool include_timing = false);
/// Wall seconds keyed "<kind>/<seed>".
nlohmann::json reportTiming(const BenchmarkReport& report);
/// Parses a report and checks the stored aggregates against recomputation.
BenchmarkReport reportFromJson(const nlohmann::json& j);

/// Rows = model kinds, columns = the six statistics.
std::string reportToCsv(const BenchmarkReport& report);

/// Every curve twice: once labelled p, once labelled permute(p).
Dataset makeAmbiguityDataset(const std::vector<MaterialParamsd>& params, const StrainGridd& grid);

std::uint64_t fingerprint(const InverseModel& model);

}  // namespace hardid
