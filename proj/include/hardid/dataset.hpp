#pragma once

#include "hardid/curve_metric.hpp"
#include "hardid/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hardid {

/// Axis-aligned box of admissible parameters, 0 < lower < upper.
struct ParameterBox {
  MaterialParamsd lower;
  MaterialParamsd upper;

  ParameterBox(const MaterialParamsd& lo, const MaterialParamsd& hi);

  /// gamma in [10, 1000], beta in [5, 500].
  static ParameterBox defaults();

  bool contains(const MaterialParamsd& p) const;
};

enum class DatasetRole { Train, Test };

std::string roleName(DatasetRole role);
DatasetRole parseDatasetRole(const std::string& text);

struct Dataset {
  std::vector<MaterialParamsd> params;
  std::vector<StressCurved> curves;
  StrainGridd grid;
  DatasetRole role = DatasetRole::Train;

  std::size_t size() const { return params.size(); }

  /// Curves stacked column-wise (grid.count() x size()), the network input.
  MatrixXd curveMatrix() const;
  /// Parameters stacked column-wise (4 x size()).
  MatrixXd paramMatrix() const;
};

/// Parse/validation failure for dataset files. `record()` names the offending
/// record when the problem is local to one.
class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(const std::string& what, std::optional<std::size_t> record = {});
  std::optional<std::size_t> record() const { return record_; }

 private:
  std::optional<std::size_t> record_;
};

std::vector<MaterialParamsd> sampleLogUniform(const ParameterBox& box, std::size_t n,
                                              std::uint64_t seed);
std::vector<MaterialParamsd> sampleUniform(const ParameterBox& box, std::size_t n,
                                           std::uint64_t seed);

/// Greedy farthest-point (maximin) selection of n candidates under the curve
/// distance. With no prior points, the first pick is the candidate farthest
/// from the zero curve; each later pick maximizes the minimum distance to
/// everything selected so far, prior points included. Ties go to the lower
/// candidate index. Returns candidate indices in selection order.
///
/// Distance bounds are refreshed lazily, which selects exactly what a full
/// rescan per step would.
std::vector<std::size_t> maximinSelect(const std::vector<MaterialParamsd>& candidates,
                                       std::size_t n, const StrainGridd& grid,
                                       const QuadratureSpec& quad,
                                       const std::vector<MaterialParamsd>& prior = {},
                                       int jobs = 1);

/// Draws pool_size log-uniform candidates from the box and keeps the n chosen
/// by maximinSelect, in selection order.
std::vector<MaterialParamsd> sampleSpaceFilling(const ParameterBox& box, std::size_t n,
                                                std::size_t pool_size,
                                                const StrainGridd& grid,
                                                const QuadratureSpec& quad,
                                                std::uint64_t seed,
                                                const std::vector<MaterialParamsd>& prior = {},
                                                int jobs = 1);

/// Distance from each point to its nearest other point in the set.
std::vector<double> nearestNeighborDistances(const std::vector<MaterialParamsd>& points,
                                             const StrainGridd& grid,
                                             const QuadratureSpec& quad, int jobs = 1);

/// std / mean (population std).
double coefficientOfVariation(const std::vector<double>& values);

Dataset buildDataset(const std::vector<MaterialParamsd>& params, const StrainGridd& grid,
                     DatasetRole role);

nlohmann::json datasetToJson(const Dataset& d);
Dataset datasetFromJson(const nlohmann::json& j);

void saveDataset(const Dataset& d, const std::filesystem::path& path);
Dataset loadDataset(const std::filesystem::path& path);

nlohmann::json gridToJson(const StrainGridd& grid);
StrainGridd gridFromJson(const nlohmann::json& j);

}  // namespace hardid
