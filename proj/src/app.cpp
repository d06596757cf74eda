#include "hardid/app.hpp"

#include "hardid/benchmark.hpp"
#include "hardid/curve_metric.hpp"
#include "hardid/io.hpp"
#include "hardid/material_model.hpp"
#include "hardid/models.hpp"
#include "hardid/rng.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>

namespace hardid {

namespace fs = std::filesystem;

namespace {

std::string utcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

AppConfig configFrom(const std::optional<fs::path>& path) {
  return path ? loadConfig(*path) : parseConfig("");
}

std::string configHash(const AppConfig& cfg) { return sha256Hex(configToJson(cfg).dump()); }

bool refuseOverwrite(const std::vector<fs::path>& targets, bool force, std::ostream& err) {
  if (force) return false;
  for (const auto& t : targets) {
    if (fs::exists(t)) {
      err << "error: " << t.string() << " already exists (use --force to overwrite)\n";
      return true;
    }
  }
  return false;
}

std::string formatParams(const Vector4d& p) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << p[0] << ' ' << p[1] << ' ' << p[2] << ' ' << p[3];
  return s.str();
}

std::vector<double> parseNumberList(const std::string& text) {
  std::string normalized = text;
  for (char& c : normalized) {
    if (c == ',' || c == '[' || c == ']' || c == '\n' || c == '\t' || c == ';') c = ' ';
  }
  std::istringstream in(normalized);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw std::invalid_argument("not a number: '" + token + "'");
    values.push_back(v);
  }
  return values;
}

}  // namespace

std::pair<Dataset, Dataset> generateDatasets(const AppConfig& cfg, int jobs) {
  const auto& d = cfg.dataset;
  const auto train_params = sampleSpaceFilling(d.box, d.n_train, d.pool_train, cfg.grid, cfg.quad,
                                               deriveSeed(d.seed, 1), {}, jobs);
  const auto test_params = sampleSpaceFilling(d.box, d.n_test, d.pool_test, cfg.grid, cfg.quad,
                                              deriveSeed(d.seed, 2), train_params, jobs);
  return {buildDataset(train_params, cfg.grid, DatasetRole::Train),
          buildDataset(test_params, cfg.grid, DatasetRole::Test)};
}

int cmdGenData(const GenDataOptions& opts, std::ostream& out, std::ostream& err) {
  AppConfig cfg;
  try {
    cfg = configFrom(opts.config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  }
  const fs::path train_path = opts.out_dir / "train.json";
  const fs::path test_path = opts.out_dir / "test.json";
  const fs::path manifest_path = opts.out_dir / "manifest.json";
  if (refuseOverwrite({train_path, test_path, manifest_path}, opts.force, err)) return kExitUsage;

  try {
    fs::create_directories(opts.out_dir);
    const auto started = utcTimestamp();
    auto [train, test] = generateDatasets(cfg, opts.jobs);
    const std::string cfg_hash = configHash(cfg);
    const nlohmann::json provenance = {{"config_sha256", cfg_hash}, {"tool_version", kToolVersion}};

    auto write = [&](const Dataset& d, const fs::path& path) {
      nlohmann::json j = datasetToJson(d);
      j["provenance"] = provenance;
      writeFileAtomic(path, j.dump(1) + "\n");
    };
    write(train, train_path);
    write(test, test_path);

    const nlohmann::json manifest = {
        {"tool_version", kToolVersion},
        {"command", "gen-data"},
        {"config", configToJson(cfg)},
        {"config_sha256", cfg_hash},
        {"outputs", {{"train", {{"path", train_path.filename().string()}, {"sha256", sha256OfFile(train_path)}}},
                     {"test", {{"path", test_path.filename().string()}, {"sha256", sha256OfFile(test_path)}}}}},
        {"timestamps", {{"started", started}, {"finished", utcTimestamp()}}}};
    writeFileAtomic(manifest_path, manifest.dump(2) + "\n");
    out << "wrote " << train.size() << " train and " << test.size() << " test records to "
        << opts.out_dir.string() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmdBenchmark(const BenchmarkOptions& opts, std::ostream& out, std::ostream& err) {
  const fs::path report_path = opts.out_dir / "report.json";
  const fs::path csv_path = opts.out_dir / "table.csv";
  const fs::path manifest_path = opts.out_dir / "manifest.json";

  if (opts.render_only) {
    try {
      if (!fs::exists(report_path)) {
        err << "error: no report at " << report_path.string() << '\n';
        return kExitUsage;
      }
      const BenchmarkReport report = reportFromJson(nlohmann::json::parse(readTextFile(report_path)));
      writeFileAtomic(csv_path, reportToCsv(report));
      out << reportToCsv(report);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitRuntime;
    }
    return kExitOk;
  }

  AppConfig cfg;
  int jobs = 1;
  try {
    cfg = configFrom(opts.config);
    if (opts.kinds) {
      std::ostringstream text;
      text << "benchmark.kinds = " << *opts.kinds << '\n';
      cfg.train.kinds = parseConfig(text.str()).train.kinds;
    }
    if (opts.seeds) {
      if (*opts.seeds == 0) throw ConfigError("--seeds must be >= 1");
      const std::uint64_t base = cfg.train.seeds.front();
      cfg.train.seeds.resize(*opts.seeds);
      for (std::size_t i = 0; i < cfg.train.seeds.size(); ++i) cfg.train.seeds[i] = base + i;
    }
    jobs = opts.jobs.value_or(cfg.jobs);
    if (jobs < 1) throw ConfigError("--jobs must be >= 1");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (refuseOverwrite({report_path, csv_path, manifest_path}, opts.force, err)) return kExitUsage;

  Dataset train, test;
  try {
    train = loadDataset(opts.train_path);
    test = loadDataset(opts.test_path);
  } catch (const std::exception& e) {
    err << "dataset error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (!(train.grid == cfg.grid) || !(test.grid == cfg.grid)) {
    err << "error: dataset strain grid does not match the configured grid\n";
    return kExitUsage;
  }

  try {
    fs::create_directories(opts.out_dir);
    const fs::path models_dir = opts.out_dir / "models";
    if (opts.save_models) fs::create_directories(models_dir);
    const auto started = utcTimestamp();

    const nlohmann::json provenance = {{"config_sha256", configHash(cfg)},
                                       {"train_sha256", sha256OfFile(opts.train_path)},
                                       {"test_sha256", sha256OfFile(opts.test_path)},
                                       {"tool_version", kToolVersion}};
    std::mutex log_mutex;
    InstanceSink sink = [&](const InstanceResult& r, const InverseModel& model) {
      if (opts.save_models && r.ok) {
        nlohmann::json j = modelToJson(model);
        j["provenance"] = provenance;
        writeFileAtomic(models_dir / (kindName(r.kind) + "_seed" + std::to_string(r.seed) + ".json"),
                        j.dump() + "\n");
      }
      std::lock_guard lock(log_mutex);
      out << kindName(r.kind) << " seed " << r.seed << ": "
          << (r.ok ? "delta=" + std::to_string(r.delta) + " Delta=" + std::to_string(r.delta_max)
                   : "FAILED (" + r.failure + ")")
          << '\n';
    };
    const BenchmarkReport report = runBenchmark(cfg.train, train, test, jobs, sink);

    nlohmann::json doc = reportToJson(report);
    doc["provenance"] = provenance;
    writeFileAtomic(report_path, doc.dump(2) + "\n");
    writeFileAtomic(csv_path, reportToCsv(report));

    const nlohmann::json manifest = {
        {"tool_version", kToolVersion},
        {"command", "benchmark"},
        {"config", configToJson(cfg)},
        {"inputs", {{"train", {{"path", opts.train_path.string()}, {"sha256", provenance["train_sha256"]}}},
                    {"test", {{"path", opts.test_path.string()}, {"sha256", provenance["test_sha256"]}}}}},
        {"seeds", cfg.train.seeds},
        {"jobs", jobs},
        {"outputs", {{"report", {{"path", "report.json"}, {"sha256", sha256OfFile(report_path)}}},
                     {"table", {{"path", "table.csv"}, {"sha256", sha256OfFile(csv_path)}}}}},
        {"timing", reportTiming(report)},
        {"timestamps", {{"started", started}, {"finished", utcTimestamp()}}}};
    writeFileAtomic(manifest_path, manifest.dump(2) + "\n");
    out << reportToCsv(report);

    for (const auto& [kind, a] : report.aggregates) {
      if (a.succeeded == 0) {
        err << "error: every " << kindName(kind) << " instance failed\n";
        return kExitRuntime;
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmdPredict(const PredictOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.curve_path.has_value() == opts.values.has_value()) {
    err << "usage error: give exactly one of --curve or --values\n";
    return kExitUsage;
  }
  InverseModel model;
  try {
    model = modelFromJson(nlohmann::json::parse(readTextFile(opts.model_path)));
  } catch (const std::exception& e) {
    err << "model error: " << e.what() << '\n';
    return kExitUsage;
  }

  // Either labelled records from a dataset file, or one bare curve.
  std::vector<VectorXd> curves;
  std::vector<std::optional<MaterialParamsd>> labels;
  try {
    std::string text = opts.values ? *opts.values : readTextFile(*opts.curve_path);
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
      const Dataset d = datasetFromJson(j);
      if (!(d.grid == model.grid)) throw std::invalid_argument("dataset grid differs from the model's training grid");
      for (std::size_t i = 0; i < d.size(); ++i) {
        curves.push_back(d.curves[i].values);
        labels.emplace_back(d.params[i]);
      }
    } else {
      const auto values = parseNumberList(text);
      if (static_cast<int>(values.size()) != model.grid.count()) {
        throw std::invalid_argument("expected " + std::to_string(model.grid.count()) + " stress values, got " +
                                    std::to_string(values.size()));
      }
      curves.push_back(Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
      labels.emplace_back();
    }
  } catch (const std::exception& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    const QuadratureSpec quad;
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const MaterialParamsd p = predict(model, StressCurved{curves[i], model.grid});
      // Reconstruction residual through the forward model.
      const VectorXd refit = evaluateCurve(model.grid, p).values;
      const double rms = std::sqrt((refit - curves[i]).squaredNorm() / double(curves[i].size()));
      out << formatParams(p.vec()) << std::setprecision(17) << " curve_rms=" << rms;
      if (labels[i]) out << " distance=" << curveDistance(*labels[i], p, model.grid, quad);
      out << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace hardid
