#include "hardid/benchmark.hpp"

#include "hardid/material_model.hpp"
#include "hardid/parallel.hpp"
#include "hardid/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hardid {

TrainConfig::TrainConfig() {
  seeds.resize(20);
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{0});
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("seeds must be distinct");
  }
  if (kinds.empty()) throw std::invalid_argument("at least one model kind is required");
  if (!(adam.learning_rate > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    throw std::invalid_argument("Adam constants out of range");
  }
}

nlohmann::json trainConfigToJson(const TrainConfig& cfg) {
  std::vector<std::string> kinds;
  for (ModelKind k : cfg.kinds) kinds.push_back(kindName(k));
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.adam.learning_rate},
          {"adam_beta1", cfg.adam.beta1},
          {"adam_beta2", cfg.adam.beta2},
          {"adam_epsilon", cfg.adam.epsilon},
          {"seeds", cfg.seeds},
          {"kinds", kinds},
          {"quad_resolution", cfg.quad.resolution},
          {"std_mode", cfg.std_mode == StdMode::Population ? "population" : "sample"}};
}

TrainResult trainInstance(ModelKind kind, const Dataset& train, const TrainConfig& cfg,
                          std::uint64_t seed) {
  cfg.validate();
  const MatrixXd curves = train.curveMatrix();
  const MatrixXd params = train.paramMatrix();
  TrainResult result{InverseModel::init(kind, train.grid, curves, params, seed), {}, 0, false, {}};

  auto blocks = result.model.paramBlocks();
  std::vector<AdamState<double>> states;
  for (const auto* b : blocks) states.push_back(AdamState<double>::forParams(*b));

  const std::size_t n = train.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng shuffler(deriveSeed(seed, 0x5eed));
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  MatrixXd batch_curves, batch_params;
  std::vector<NetParams<double>> grads;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(std::span<Eigen::Index>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t len = std::min(batch_size, n - start);
      const std::span<const Eigen::Index> rows(order.data() + start, len);
      batch_curves = curves(Eigen::all, rows);
      batch_params = params(Eigen::all, rows);

      grads.clear();
      for (const auto* b : blocks) grads.push_back(NetParams<double>::zerosLike(*b));
      const double loss = batchLossAndGradient(result.model, batch_curves, batch_params, grads);
      if (!std::isfinite(loss)) {
        result.failed = true;
        result.diagnostic = "non-finite loss in epoch " + std::to_string(epoch) + " at batch offset " +
                            std::to_string(start);
        return result;
      }
      epoch_loss += loss;
      for (std::size_t b = 0; b < blocks.size(); ++b) adamStep(*blocks[b], grads[b], states[b], cfg.adam);
      ++result.updates;
    }
    for (const auto* b : blocks) {
      if (!b->allFinite()) {
        result.failed = true;
        result.diagnostic = "non-finite network parameter after epoch " + std::to_string(epoch);
        return result;
      }
    }
    result.epoch_losses.push_back(epoch_loss / double(n));
  }
  return result;
}

std::vector<double> predictionErrors(const MatrixXd& predictions, const Dataset& test,
                                     const QuadratureSpec& quad) {
  if (predictions.rows() != 4 || predictions.cols() != static_cast<Eigen::Index>(test.size())) {
    throw std::invalid_argument("need one 4-vector prediction per test record");
  }
  std::vector<double> errors(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const MaterialParamsd predicted(Vector4d(predictions.col(static_cast<Eigen::Index>(i))));
    errors[i] = curveDistance(test.params[i], predicted, test.grid, quad);
  }
  return errors;
}

double meanPredError(const InverseModel& model, const Dataset& test, const QuadratureSpec& quad) {
  const auto errors = predictionErrors(predictBatch(model, test.curveMatrix()), test, quad);
  return std::accumulate(errors.begin(), errors.end(), 0.0) / double(errors.size());
}

double maxPredError(const InverseModel& model, const Dataset& test, const QuadratureSpec& quad) {
  const auto errors = predictionErrors(predictBatch(model, test.curveMatrix()), test, quad);
  return *std::max_element(errors.begin(), errors.end());
}

namespace {

struct Moments {
  double mean;
  double std;
  double min;
};

Moments moments(const std::vector<double>& v, StdMode mode) {
  if (v.empty()) return {std::nan(""), std::nan(""), std::nan("")};
  const double n = double(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double denom = mode == StdMode::Population ? n : std::max(n - 1.0, 1.0);
  return {mean, std::sqrt(ss / denom), *std::min_element(v.begin(), v.end())};
}

}  // namespace

Aggregates aggregate(const std::vector<InstanceResult>& instances, StdMode mode) {
  std::vector<double> deltas, maxima;
  Aggregates a;
  for (const auto& r : instances) {
    if (!r.ok) {
      ++a.failed;
      continue;
    }
    ++a.succeeded;
    deltas.push_back(r.delta);
    maxima.push_back(r.delta_max);
  }
  const Moments d = moments(deltas, mode);
  const Moments m = moments(maxima, mode);
  a.mean_delta = d.mean;
  a.std_delta = d.std;
  a.min_delta = d.min;
  a.mean_delta_max = m.mean;
  a.std_delta_max = m.std;
  a.min_delta_max = m.min;
  return a;
}

std::vector<InstanceResult> BenchmarkReport::instancesOf(ModelKind kind) const {
  std::vector<InstanceResult> out;
  for (const auto& r : instances) {
    if (r.kind == kind) out.push_back(r);
  }
  return out;
}

std::uint64_t fingerprint(const InverseModel& model) {
  // FNV-1a over the raw bytes of every trainable parameter.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto* block : model.paramBlocks()) {
    const VectorXd flat = block->flatten();
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &flat[i], sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

BenchmarkReport runBenchmark(const TrainConfig& cfg, const Dataset& train, const Dataset& test,
                             int jobs, const InstanceSink& sink) {
  cfg.validate();
  if (!(train.grid == test.grid)) throw std::invalid_argument("train and test datasets use different strain grids");

  BenchmarkReport report;
  report.config = trainConfigToJson(cfg);
  for (ModelKind kind : cfg.kinds) {
    for (std::uint64_t seed : cfg.seeds) report.instances.push_back({kind, seed});
  }

  parallelFor(report.instances.size(), jobs, [&](std::size_t i) {
    InstanceResult& r = report.instances[i];
    const auto start = std::chrono::steady_clock::now();
    TrainResult trained = trainInstance(r.kind, train, cfg, r.seed);
    if (trained.failed) {
      r.ok = false;
      r.failure = trained.diagnostic;
    } else {
      const auto errors = predictionErrors(predictBatch(trained.model, test.curveMatrix()), test, cfg.quad);
      r.delta = std::accumulate(errors.begin(), errors.end(), 0.0) / double(errors.size());
      r.delta_max = *std::max_element(errors.begin(), errors.end());
      r.first_loss = trained.epoch_losses.front();
      r.final_loss = trained.epoch_losses.back();
      r.param_fingerprint = fingerprint(trained.model);
      if (!std::isfinite(r.delta) || !std::isfinite(r.delta_max)) {
        r.ok = false;
        r.failure = "non-finite prediction error";
      }
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (sink) sink(r, trained.model);
  });

  for (ModelKind kind : cfg.kinds) report.aggregates[kind] = aggregate(report.instancesOf(kind), cfg.std_mode);
  return report;
}

namespace {

nlohmann::json aggregatesToJson(const Aggregates& a) {
  return {{"succeeded", a.succeeded},       {"failed", a.failed},
          {"mean_delta", a.mean_delta},     {"mean_Delta", a.mean_delta_max},
          {"std_delta", a.std_delta},       {"std_Delta", a.std_delta_max},
          {"min_delta", a.min_delta},       {"min_Delta", a.min_delta_max}};
}

// NaN statistics (no successful instance) are stored as null.
double numberOrNan(const nlohmann::json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

bool sameBits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0 || (std::isnan(a) && std::isnan(b)); }

std::string instanceKey(const InstanceResult& r) {
  return kindName(r.kind) + "/" + std::to_string(r.seed);
}

}  // namespace

nlohmann::json reportTiming(const BenchmarkReport& report) {
  nlohmann::json timing = nlohmann::json::object();
  for (const auto& r : report.instances) timing[instanceKey(r)] = r.wall_seconds;
  return timing;
}

nlohmann::json reportToJson(const BenchmarkReport& report, bool include_timing) {
  nlohmann::json instances = nlohmann::json::array();
  for (const auto& r : report.instances) {
    nlohmann::json rec = {{"kind", kindName(r.kind)}, {"seed", r.seed}, {"ok", r.ok}};
    if (r.ok) {
      rec["first_loss"] = r.first_loss;
      rec["final_loss"] = r.final_loss;
      rec["delta"] = r.delta;
      rec["Delta"] = r.delta_max;
      rec["param_fingerprint"] = r.param_fingerprint;
    } else {
      rec["failure"] = r.failure;
    }
    instances.push_back(rec);
  }
  nlohmann::json aggregates = nlohmann::json::object();
  for (const auto& [kind, a] : report.aggregates) aggregates[kindName(kind)] = aggregatesToJson(a);
  nlohmann::json doc = {{"format", "hardid-benchmark-report/1"},
                        {"config", report.config},
                        {"instances", instances},
                        {"aggregates", aggregates}};
  if (include_timing) doc["timing"] = reportTiming(report);
  return doc;
}

BenchmarkReport reportFromJson(const nlohmann::json& j) {
  BenchmarkReport report;
  try {
    report.config = j.at("config");
    const auto& timing = j.contains("timing") ? j.at("timing") : nlohmann::json::object();
    for (const auto& rec : j.at("instances")) {
      InstanceResult r;
      r.kind = parseModelKind(rec.at("kind").get<std::string>());
      r.seed = rec.at("seed").get<std::uint64_t>();
      r.ok = rec.at("ok").get<bool>();
      if (r.ok) {
        r.first_loss = rec.at("first_loss").get<double>();
        r.final_loss = rec.at("final_loss").get<double>();
        r.delta = rec.at("delta").get<double>();
        r.delta_max = rec.at("Delta").get<double>();
        r.param_fingerprint = rec.at("param_fingerprint").get<std::uint64_t>();
      } else {
        r.failure = rec.at("failure").get<std::string>();
      }
      if (timing.contains(instanceKey(r))) r.wall_seconds = timing.at(instanceKey(r)).get<double>();
      report.instances.push_back(r);
    }
    const StdMode mode = report.config.value("std_mode", std::string("population")) == "sample"
                             ? StdMode::Sample
                             : StdMode::Population;
    for (const auto& [name, a] : j.at("aggregates").items()) {
      const ModelKind kind = parseModelKind(name);
      const Aggregates stored{a.at("succeeded").get<std::size_t>(), a.at("failed").get<std::size_t>(),
                              numberOrNan(a.at("mean_delta")),     numberOrNan(a.at("mean_Delta")),
                              numberOrNan(a.at("std_delta")),      numberOrNan(a.at("std_Delta")),
                              numberOrNan(a.at("min_delta")),      numberOrNan(a.at("min_Delta"))};
      const Aggregates recomputed = aggregate(report.instancesOf(kind), mode);
      const bool match = stored.succeeded == recomputed.succeeded && stored.failed == recomputed.failed &&
                         sameBits(stored.mean_delta, recomputed.mean_delta) &&
                         sameBits(stored.mean_delta_max, recomputed.mean_delta_max) &&
                         sameBits(stored.std_delta, recomputed.std_delta) &&
                         sameBits(stored.std_delta_max, recomputed.std_delta_max) &&
                         sameBits(stored.min_delta, recomputed.min_delta) &&
                         sameBits(stored.min_delta_max, recomputed.min_delta_max);
      if (!match) {
        throw std::invalid_argument("stored aggregates for '" + name +
                                    "' do not match recomputation from the instance records");
      }
      report.aggregates[kind] = recomputed;
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
  }
  return report;
}

std::string reportToCsv(const BenchmarkReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "model,mean_delta,mean_Delta,std_delta,std_Delta,min_delta,min_Delta\n";
  for (const auto& [kind, a] : report.aggregates) {
    out << kindName(kind) << ',' << a.mean_delta << ',' << a.mean_delta_max << ',' << a.std_delta
        << ',' << a.std_delta_max << ',' << a.min_delta << ',' << a.min_delta_max << '\n';
  }
  return out.str();
}

Dataset makeAmbiguityDataset(const std::vector<MaterialParamsd>& params, const StrainGridd& grid) {
  std::vector<MaterialParamsd> doubled;
  doubled.reserve(2 * params.size());
  for (const auto& p : params) {
    doubled.push_back(p);
    doubled.push_back(permute(p));
  }
  return buildDataset(doubled, grid, DatasetRole::Train);
}

}  // namespace hardid
