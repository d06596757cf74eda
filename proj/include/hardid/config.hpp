#pragma once

// Flat "section.key = value" configuration. Blank lines and text after '#'
// are ignored; every key has a default, so an empty file is a valid config.
//
//   grid.eps_start = 0          grid.eps_end = 0.1        grid.count = 20
//   quad.resolution = 2000
//   dataset.gamma_min = 10      dataset.gamma_max = 1000
//   dataset.beta_min = 5        dataset.beta_max = 500
//   dataset.n_train = 1000      dataset.pool_train = 20000
//   dataset.n_test = 200        dataset.pool_test = 4000  dataset.seed = 1
//   train.epochs = 500          train.batch_size = 32     train.learning_rate = 1e-3
//   train.adam_beta1 = 0.9      train.adam_beta2 = 0.999  train.adam_epsilon = 1e-8
//   benchmark.seeds = 20        benchmark.seed_base = 0
//   benchmark.kinds = bad,good,ugly                       benchmark.std = population
//   benchmark.jobs = 1

#include "hardid/benchmark.hpp"
#include "hardid/dataset.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace hardid {

struct DatasetConfig {
  ParameterBox box = ParameterBox::defaults();
  std::size_t n_train = 1000;
  std::size_t pool_train = 20000;
  std::size_t n_test = 200;
  std::size_t pool_test = 4000;
  std::uint64_t seed = 1;
};

struct AppConfig {
  StrainGridd grid;
  QuadratureSpec quad;
  DatasetConfig dataset;
  TrainConfig train;
  int jobs = 1;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

AppConfig parseConfig(const std::string& text);
AppConfig loadConfig(const std::filesystem::path& path);

/// Every resolved setting, defaults included.
nlohmann::json configToJson(const AppConfig& cfg);

}  // namespace hardid
