#include "hardid/benchmark.hpp"
#include "hardid/material_model.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

using namespace hardid;

namespace {

const QuadratureSpec kCoarse(200);

Dataset smallDataset(std::size_t n, std::uint64_t seed, DatasetRole role) {
  return buildDataset(sampleLogUniform(ParameterBox::defaults(), n, seed), StrainGridd(), role);
}

TrainConfig quickConfig(int epochs, std::vector<std::uint64_t> seeds) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seeds = std::move(seeds);
  cfg.quad = kCoarse;
  return cfg;
}

MatrixXd paramColumns(const std::vector<MaterialParamsd>& ps) {
  MatrixXd m(4, Eigen::Index(ps.size()));
  for (std::size_t i = 0; i < ps.size(); ++i) m.col(Eigen::Index(i)) = ps[i].vec();
  return m;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK(cfg.seeds.size() == 20);
  CHECK(cfg.seeds.back() == 19);
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig();
  cfg.seeds = {1, 1};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig();
  cfg.kinds.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("training bookkeeping") {
  const Dataset one = smallDataset(1, 3, DatasetRole::Train);
  for (ModelKind kind : kAllModelKinds) {
    const auto r = trainInstance(kind, one, quickConfig(1, {0}), 0);
    CHECK(!r.failed);
    CHECK(r.updates == 1);
    CHECK(r.epoch_losses.size() == 1);
  }
  const Dataset seventy = smallDataset(70, 4, DatasetRole::Train);
  const auto r = trainInstance(ModelKind::Bad, seventy, quickConfig(2, {0}), 0);
  CHECK(r.updates == 6);  // ceil(70 / 32) per epoch
}

TEST_CASE("training is deterministic and seed dependent") {
  const Dataset train = smallDataset(40, 5, DatasetRole::Train);
  for (ModelKind kind : kAllModelKinds) {
    const auto a = trainInstance(kind, train, quickConfig(3, {0}), 7);
    const auto b = trainInstance(kind, train, quickConfig(3, {0}), 7);
    const auto c = trainInstance(kind, train, quickConfig(3, {0}), 8);
    CHECK(a.epoch_losses == b.epoch_losses);
    CHECK(fingerprint(a.model) == fingerprint(b.model));
    CHECK(fingerprint(a.model) != fingerprint(c.model));
  }
}

TEST_CASE("prediction error oracles") {
  const Dataset test = smallDataset(12, 6, DatasetRole::Test);
  std::vector<MaterialParamsd> permuted;
  for (const auto& p : test.params) permuted.push_back(permute(p));

  const auto exact = predictionErrors(paramColumns(test.params), test, kCoarse);
  for (double e : exact) CHECK(e == 0.0);
  const auto swapped = predictionErrors(paramColumns(permuted), test, kCoarse);
  for (double e : swapped) CHECK(e < 1e-10);

  // Singleton test set with a constant guess q.
  const Dataset single = buildDataset({test.params[0]}, test.grid, DatasetRole::Test);
  const MaterialParamsd q(100, 100, 50, 50);
  const auto err = predictionErrors(paramColumns({q}), single, kCoarse);
  CHECK(err[0] == curveDistance(test.params[0], q, test.grid, kCoarse));

  CHECK_THROWS_AS(predictionErrors(MatrixXd::Zero(4, 3), test, kCoarse), std::invalid_argument);
}

TEST_CASE("max error bounds the mean") {
  const Dataset train = smallDataset(30, 7, DatasetRole::Train);
  const Dataset test = smallDataset(10, 8, DatasetRole::Test);
  for (ModelKind kind : kAllModelKinds) {
    const auto r = trainInstance(kind, train, quickConfig(2, {0}), 1);
    CHECK(maxPredError(r.model, test, kCoarse) >= meanPredError(r.model, test, kCoarse));
    const Dataset single = buildDataset({test.params[2]}, test.grid, DatasetRole::Test);
    CHECK(maxPredError(r.model, single, kCoarse) == meanPredError(r.model, single, kCoarse));
  }
}

TEST_CASE("aggregation") {
  InstanceResult a{ModelKind::Good, 0};
  a.delta = 2.0;
  a.delta_max = 5.0;
  const Aggregates one = aggregate({a}, StdMode::Population);
  CHECK(one.succeeded == 1);
  CHECK(one.std_delta == 0.0);
  CHECK(one.std_delta_max == 0.0);
  CHECK(one.min_delta == one.mean_delta);
  CHECK(one.min_delta_max == one.mean_delta_max);

  InstanceResult b = a, failed = a;
  b.seed = 1;
  b.delta = 4.0;
  b.delta_max = 9.0;
  failed.seed = 2;
  failed.ok = false;
  const Aggregates two = aggregate({a, b, failed}, StdMode::Population);
  CHECK(two.succeeded == 2);
  CHECK(two.failed == 1);
  CHECK(two.mean_delta == 3.0);
  CHECK(two.std_delta == 1.0);
  CHECK(two.min_delta_max == 5.0);
  CHECK(aggregate({a, b}, StdMode::Sample).std_delta == doctest::Approx(std::sqrt(2.0)));
  CHECK(std::isnan(aggregate({failed}, StdMode::Population).mean_delta));
}

TEST_CASE("benchmark reports") {
  const Dataset train = smallDataset(30, 9, DatasetRole::Train);
  const Dataset test = smallDataset(8, 10, DatasetRole::Test);
  const TrainConfig cfg = quickConfig(2, {0, 1});
  const BenchmarkReport report = runBenchmark(cfg, train, test, 2);

  REQUIRE(report.instances.size() == 6);
  std::set<std::uint64_t> prints;
  for (const auto& r : report.instances) {
    CHECK(r.ok);
    CHECK(r.delta <= r.delta_max);
    prints.insert(r.param_fingerprint);
  }
  CHECK(prints.size() == 6);
  CHECK(report.instances[0].kind == ModelKind::Bad);
  CHECK(report.instances[5].kind == ModelKind::Ugly);

  SUBCASE("round trip and recomputation") {
    const auto j = reportToJson(report);
    CHECK(!j.contains("timing"));
    CHECK(reportToJson(report, true).contains("timing"));
    const BenchmarkReport back = reportFromJson(nlohmann::json::parse(j.dump()));
    CHECK(back.aggregates == report.aggregates);
    CHECK(reportToJson(back) == j);
  }

  SUBCASE("tampered aggregates are rejected") {
    auto j = reportToJson(report);
    j["aggregates"]["good"]["mean_delta"] = j["aggregates"]["good"]["mean_delta"].get<double>() * (1 + 1e-15);
    CHECK_THROWS_AS(reportFromJson(j), std::invalid_argument);
    j = reportToJson(report);
    j["instances"][0]["delta"] = 0.0;
    CHECK_THROWS_AS(reportFromJson(j), std::invalid_argument);
  }

  SUBCASE("CSV table") {
    std::istringstream csv(reportToCsv(report));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "model,mean_delta,mean_Delta,std_delta,std_Delta,min_delta,min_Delta");
    CHECK(lines[1].rfind("bad,", 0) == 0);
    CHECK(lines[3].rfind("ugly,", 0) == 0);
    for (const auto& l : lines) CHECK(std::count(l.begin(), l.end(), ',') == 6);
  }

  SUBCASE("thread count does not change results") {
    CHECK(reportToJson(runBenchmark(cfg, train, test, 1)) == reportToJson(report));
  }

  SUBCASE("grid mismatch") {
    const Dataset other = buildDataset(test.params, StrainGridd(0.0, 0.2, 20), DatasetRole::Test);
    CHECK_THROWS_AS(runBenchmark(cfg, train, other), std::invalid_argument);
  }
}

TEST_CASE("ambiguity dataset") {
  const MaterialParamsd p(300, 20, 40, 7);
  const Dataset d = makeAmbiguityDataset({p, MaterialParamsd(50, 60, 70, 80)}, StrainGridd());
  REQUIRE(d.size() == 4);
  CHECK(d.params[0] == p);
  CHECK(d.params[1] == permute(p));
  CHECK(d.curves[0].values == d.curves[1].values);
}
