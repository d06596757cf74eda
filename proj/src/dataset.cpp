#include "hardid/dataset.hpp"

#include "hardid/io.hpp"
#include "hardid/material_model.hpp"
#include "hardid/parallel.hpp"
#include "hardid/rng.hpp"

#include <cmath>
#include <limits>
#include <queue>

namespace hardid {

ParameterBox::ParameterBox(const MaterialParamsd& lo, const MaterialParamsd& hi)
    : lower(lo), upper(hi) {
  for (int k = 0; k < MaterialParamsd::kSize; ++k) {
    if (!(lower[k] > 0.0 && lower[k] < upper[k]) || !std::isfinite(upper[k])) {
      throw std::invalid_argument("parameter box needs 0 < lower < upper in every component");
    }
  }
}

ParameterBox ParameterBox::defaults() {
  return {MaterialParamsd(10.0, 10.0, 5.0, 5.0), MaterialParamsd(1000.0, 1000.0, 500.0, 500.0)};
}

bool ParameterBox::contains(const MaterialParamsd& p) const {
  return (p.vec().array() >= lower.vec().array()).all() &&
         (p.vec().array() <= upper.vec().array()).all();
}

std::string roleName(DatasetRole role) { return role == DatasetRole::Train ? "train" : "test"; }

DatasetRole parseDatasetRole(const std::string& text) {
  if (text == "train") return DatasetRole::Train;
  if (text == "test") return DatasetRole::Test;
  throw DatasetError("unknown dataset role '" + text + "'");
}

MatrixXd Dataset::curveMatrix() const {
  MatrixXd m(grid.count(), static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) m.col(static_cast<Eigen::Index>(i)) = curves[i].values;
  return m;
}

MatrixXd Dataset::paramMatrix() const {
  MatrixXd m(4, static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) m.col(static_cast<Eigen::Index>(i)) = params[i].vec();
  return m;
}

DatasetError::DatasetError(const std::string& what, std::optional<std::size_t> record)
    : std::runtime_error(record ? "record " + std::to_string(*record) + ": " + what : what),
      record_(record) {}

std::vector<MaterialParamsd> sampleLogUniform(const ParameterBox& box, std::size_t n,
                                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MaterialParamsd> out(n);
  for (auto& p : out) {
    for (int k = 0; k < MaterialParamsd::kSize; ++k) {
      const double lo = std::log(box.lower[k]);
      const double hi = std::log(box.upper[k]);
      // Clamp guards the round trip through log/exp at the box faces.
      p[k] = std::clamp(std::exp(rng.uniform(lo, hi)), box.lower[k], box.upper[k]);
    }
  }
  return out;
}

std::vector<MaterialParamsd> sampleUniform(const ParameterBox& box, std::size_t n,
                                           std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MaterialParamsd> out(n);
  for (auto& p : out) {
    for (int k = 0; k < MaterialParamsd::kSize; ++k) p[k] = rng.uniform(box.lower[k], box.upper[k]);
  }
  return out;
}

namespace {

MatrixXd nodeMatrix(const std::vector<MaterialParamsd>& points, const StrainGridd& grid,
                    const QuadratureSpec& quad, int jobs) {
  MatrixXd nodes(quad.resolution + 1, static_cast<Eigen::Index>(points.size()));
  parallelFor(points.size(), jobs, [&](std::size_t i) {
    nodes.col(static_cast<Eigen::Index>(i)) = sampleOnQuadratureNodes(points[i], grid, quad);
  });
  return nodes;
}

struct Bound {
  double distance;
  std::size_t index;
};

// Max-heap on distance; lower index wins ties.
struct BoundLess {
  bool operator()(const Bound& a, const Bound& b) const {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.index > b.index;
  }
};

}  // namespace

std::vector<std::size_t> maximinSelect(const std::vector<MaterialParamsd>& candidates,
                                       std::size_t n, const StrainGridd& grid,
                                       const QuadratureSpec& quad,
                                       const std::vector<MaterialParamsd>& prior, int jobs) {
  if (n > candidates.size()) {
    throw std::invalid_argument("pool size " + std::to_string(candidates.size()) +
                                " is smaller than the requested selection " + std::to_string(n));
  }
  std::vector<std::size_t> selected;
  if (n == 0) return selected;
  selected.reserve(n);

  const MatrixXd nodes = nodeMatrix(candidates, grid, quad, jobs);
  const Eigen::Index node_count = nodes.rows();
  const std::size_t pool = candidates.size();

  // Columns 0..prior-1 hold the prior points, later columns the picks.
  MatrixXd refs(node_count, static_cast<Eigen::Index>(prior.size() + n));
  if (!prior.empty()) refs.leftCols(static_cast<Eigen::Index>(prior.size())) = nodeMatrix(prior, grid, quad, jobs);
  std::size_t ref_count = prior.size();

  std::vector<double> bound(pool, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> checked(pool, 0);

  if (prior.empty()) {
    const VectorXd zero = VectorXd::Zero(node_count);
    std::size_t first = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < pool; ++i) {
      const double d = trapezoidMeanAbsDiff(nodes.col(static_cast<Eigen::Index>(i)), zero);
      if (d > best) {
        best = d;
        first = i;
      }
    }
    selected.push_back(first);
    refs.col(static_cast<Eigen::Index>(ref_count++)) = nodes.col(static_cast<Eigen::Index>(first));
  } else {
    parallelFor(pool, jobs, [&](std::size_t i) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < ref_count; ++r) {
        m = std::min(m, trapezoidMeanAbsDiff(nodes.col(static_cast<Eigen::Index>(i)),
                                             refs.col(static_cast<Eigen::Index>(r))));
      }
      bound[i] = m;
      checked[i] = ref_count;
    });
  }

  std::vector<bool> taken(pool, false);
  for (std::size_t s : selected) taken[s] = true;
  std::priority_queue<Bound, std::vector<Bound>, BoundLess> heap;
  for (std::size_t i = 0; i < pool; ++i) {
    if (!taken[i]) heap.push({bound[i], i});
  }

  // A popped entry whose bound is current against every reference is the
  // exact argmax: every other bound is an upper bound on its true minimum.
  while (selected.size() < n) {
    const Bound top = heap.top();
    heap.pop();
    const std::size_t i = top.index;
    if (checked[i] < ref_count) {
      double m = bound[i];
      for (std::size_t r = checked[i]; r < ref_count; ++r) {
        m = std::min(m, trapezoidMeanAbsDiff(nodes.col(static_cast<Eigen::Index>(i)),
                                             refs.col(static_cast<Eigen::Index>(r))));
      }
      bound[i] = m;
      checked[i] = ref_count;
      heap.push({m, i});
      continue;
    }
    selected.push_back(i);
    refs.col(static_cast<Eigen::Index>(ref_count++)) = nodes.col(static_cast<Eigen::Index>(i));
  }
  return selected;
}

std::vector<MaterialParamsd> sampleSpaceFilling(const ParameterBox& box, std::size_t n,
                                                std::size_t pool_size, const StrainGridd& grid,
                                                const QuadratureSpec& quad, std::uint64_t seed,
                                                const std::vector<MaterialParamsd>& prior,
                                                int jobs) {
  if (n < 2) throw std::invalid_argument("space-filling sample needs n >= 2");
  if (pool_size < n) {
    throw std::invalid_argument("pool_size (" + std::to_string(pool_size) +
                                ") must be at least n (" + std::to_string(n) + ")");
  }
  const auto pool = sampleLogUniform(box, pool_size, seed);
  const auto picks = maximinSelect(pool, n, grid, quad, prior, jobs);
  std::vector<MaterialParamsd> out;
  out.reserve(picks.size());
  for (std::size_t i : picks) out.push_back(pool[i]);
  return out;
}

std::vector<double> nearestNeighborDistances(const std::vector<MaterialParamsd>& points,
                                             const StrainGridd& grid, const QuadratureSpec& quad,
                                             int jobs) {
  const MatrixXd nodes = nodeMatrix(points, grid, quad, jobs);
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  parallelFor(points.size(), jobs, [&](std::size_t i) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      nearest[i] = std::min(nearest[i], trapezoidMeanAbsDiff(nodes.col(static_cast<Eigen::Index>(i)),
                                                             nodes.col(static_cast<Eigen::Index>(j))));
    }
  });
  return nearest;
}

double coefficientOfVariation(const std::vector<double>& values) {
  const Eigen::Map<const VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  return std::sqrt(var) / mean;
}

Dataset buildDataset(const std::vector<MaterialParamsd>& params, const StrainGridd& grid,
                     DatasetRole role) {
  if (params.empty()) throw std::invalid_argument("cannot build a dataset from no parameters");
  Dataset d{params, {}, grid, role};
  d.curves.reserve(params.size());
  for (const auto& p : params) d.curves.push_back(evaluateCurve(grid, p));
  return d;
}

nlohmann::json gridToJson(const StrainGridd& grid) {
  return {{"eps_start", grid.epsStart()}, {"eps_end", grid.epsEnd()}, {"count", grid.count()}};
}

StrainGridd gridFromJson(const nlohmann::json& j) {
  try {
    return StrainGridd(j.at("eps_start").get<double>(), j.at("eps_end").get<double>(),
                       j.at("count").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("invalid grid: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DatasetError(std::string("invalid grid: ") + e.what());
  }
}

nlohmann::json datasetToJson(const Dataset& d) {
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& p = d.params[i].vec();
    const auto& c = d.curves[i].values;
    records.push_back({{"p", std::vector<double>(p.data(), p.data() + p.size())},
                       {"curve", std::vector<double>(c.data(), c.data() + c.size())}});
  }
  return {{"grid", gridToJson(d.grid)}, {"role", roleName(d.role)}, {"records", records}};
}

Dataset datasetFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw DatasetError("dataset document must be a JSON object");
  for (const char* key : {"grid", "role", "records"}) {
    if (!j.contains(key)) throw DatasetError(std::string("missing field '") + key + "'");
  }
  Dataset d;
  d.grid = gridFromJson(j.at("grid"));
  if (!j.at("role").is_string()) throw DatasetError("field 'role' must be a string");
  d.role = parseDatasetRole(j.at("role").get<std::string>());
  const auto& records = j.at("records");
  if (!records.is_array() || records.empty()) throw DatasetError("'records' must be a non-empty array");

  d.params.reserve(records.size());
  d.curves.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.is_object() || !r.contains("p") || !r.contains("curve")) {
      throw DatasetError("expected an object with 'p' and 'curve'", i);
    }
    const auto& p = r.at("p");
    const auto& c = r.at("curve");
    if (!p.is_array() || p.size() != 4) throw DatasetError("'p' must hold 4 numbers", i);
    if (!c.is_array()) throw DatasetError("'curve' must be an array", i);
    if (c.size() != static_cast<std::size_t>(d.grid.count())) {
      throw DatasetError("curve has " + std::to_string(c.size()) + " values but the grid has " +
                             std::to_string(d.grid.count()),
                         i);
    }
    MaterialParamsd params;
    StressCurved curve{VectorXd(d.grid.count()), d.grid};
    try {
      for (int k = 0; k < 4; ++k) params[k] = p[static_cast<std::size_t>(k)].get<double>();
      for (int k = 0; k < d.grid.count(); ++k) curve.values[k] = c[static_cast<std::size_t>(k)].get<double>();
    } catch (const nlohmann::json::exception&) {
      throw DatasetError("non-numeric entry", i);
    }
    if (!params.allFinite() || !curve.values.allFinite()) throw DatasetError("non-finite value", i);
    d.params.push_back(params);
    d.curves.push_back(std::move(curve));
  }
  return d;
}

void saveDataset(const Dataset& d, const std::filesystem::path& path) {
  writeFileAtomic(path, datasetToJson(d).dump(1) + "\n");
}

Dataset loadDataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DatasetError("no such file: " + path.string());
  const std::string text = readTextFile(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Point at the record that was being read when the text ran out.
    std::optional<std::size_t> record;
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    std::size_t count = 0;
    for (std::size_t pos = text.find("\"p\"", 0); pos != std::string::npos && pos < upto;
         pos = text.find("\"p\"", pos + 1)) {
      ++count;
    }
    if (count > 0) record = count - 1;
    throw DatasetError(std::string("malformed JSON in ") + path.string() + ": " + e.what(), record);
  }
  return datasetFromJson(j);
}

}  // namespace hardid
