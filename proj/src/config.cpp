#include "hardid/config.hpp"

#include "hardid/io.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

namespace hardid {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double toDouble(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  return out;
}

template <typename Int>
Int toInt(const std::string& key, const std::string& value) {
  Int out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
  return out;
}

struct Raw {
  double eps_start = 0.0, eps_end = 0.1;
  int count = StrainGridd::kDefaultCount;
  int resolution = QuadratureSpec::kDefaultResolution;
  double gamma_min = 10.0, gamma_max = 1000.0, beta_min = 5.0, beta_max = 500.0;
  std::size_t n_seeds = 20;
  std::uint64_t seed_base = 0;
};

}  // namespace

AppConfig parseConfig(const std::string& text) {
  AppConfig cfg;
  Raw raw;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"grid.eps_start", [&](auto& k, auto& v) { raw.eps_start = toDouble(k, v); }},
      {"grid.eps_end", [&](auto& k, auto& v) { raw.eps_end = toDouble(k, v); }},
      {"grid.count", [&](auto& k, auto& v) { raw.count = toInt<int>(k, v); }},
      {"quad.resolution", [&](auto& k, auto& v) { raw.resolution = toInt<int>(k, v); }},
      {"dataset.gamma_min", [&](auto& k, auto& v) { raw.gamma_min = toDouble(k, v); }},
      {"dataset.gamma_max", [&](auto& k, auto& v) { raw.gamma_max = toDouble(k, v); }},
      {"dataset.beta_min", [&](auto& k, auto& v) { raw.beta_min = toDouble(k, v); }},
      {"dataset.beta_max", [&](auto& k, auto& v) { raw.beta_max = toDouble(k, v); }},
      {"dataset.n_train", [&](auto& k, auto& v) { cfg.dataset.n_train = toInt<std::size_t>(k, v); }},
      {"dataset.pool_train", [&](auto& k, auto& v) { cfg.dataset.pool_train = toInt<std::size_t>(k, v); }},
      {"dataset.n_test", [&](auto& k, auto& v) { cfg.dataset.n_test = toInt<std::size_t>(k, v); }},
      {"dataset.pool_test", [&](auto& k, auto& v) { cfg.dataset.pool_test = toInt<std::size_t>(k, v); }},
      {"dataset.seed", [&](auto& k, auto& v) { cfg.dataset.seed = toInt<std::uint64_t>(k, v); }},
      {"train.epochs", [&](auto& k, auto& v) { cfg.train.epochs = toInt<int>(k, v); }},
      {"train.batch_size", [&](auto& k, auto& v) { cfg.train.batch_size = toInt<int>(k, v); }},
      {"train.learning_rate", [&](auto& k, auto& v) { cfg.train.adam.learning_rate = toDouble(k, v); }},
      {"train.adam_beta1", [&](auto& k, auto& v) { cfg.train.adam.beta1 = toDouble(k, v); }},
      {"train.adam_beta2", [&](auto& k, auto& v) { cfg.train.adam.beta2 = toDouble(k, v); }},
      {"train.adam_epsilon", [&](auto& k, auto& v) { cfg.train.adam.epsilon = toDouble(k, v); }},
      {"benchmark.seeds", [&](auto& k, auto& v) { raw.n_seeds = toInt<std::size_t>(k, v); }},
      {"benchmark.seed_base", [&](auto& k, auto& v) { raw.seed_base = toInt<std::uint64_t>(k, v); }},
      {"benchmark.kinds",
       [&](auto&, auto& v) {
         cfg.train.kinds.clear();
         std::stringstream list(v);
         for (std::string item; std::getline(list, item, ',');) {
           try {
             cfg.train.kinds.push_back(parseModelKind(trim(item)));
           } catch (const std::invalid_argument& e) {
             throw ConfigError(e.what());
           }
         }
       }},
      {"benchmark.std",
       [&](auto& k, auto& v) {
         if (v == "population") cfg.train.std_mode = StdMode::Population;
         else if (v == "sample") cfg.train.std_mode = StdMode::Sample;
         else throw ConfigError("'" + k + "' must be 'population' or 'sample'");
       }},
      {"benchmark.jobs", [&](auto& k, auto& v) { cfg.jobs = toInt<int>(k, v); }},
  };

  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      it->second(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  try {
    cfg.grid = StrainGridd(raw.eps_start, raw.eps_end, raw.count);
    cfg.quad = QuadratureSpec(raw.resolution);
    cfg.train.quad = cfg.quad;
    cfg.dataset.box = ParameterBox(MaterialParamsd(raw.gamma_min, raw.gamma_min, raw.beta_min, raw.beta_min),
                                   MaterialParamsd(raw.gamma_max, raw.gamma_max, raw.beta_max, raw.beta_max));
    cfg.train.seeds.resize(raw.n_seeds);
    std::iota(cfg.train.seeds.begin(), cfg.train.seeds.end(), raw.seed_base);
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto& d = cfg.dataset;
  if (d.n_train < 2 || d.n_test < 2) throw ConfigError("dataset sizes must be at least 2");
  if (d.pool_train < d.n_train || d.pool_test < d.n_test) throw ConfigError("candidate pools must be at least as large as the datasets");
  if (cfg.jobs < 1) throw ConfigError("benchmark.jobs must be >= 1");
  return cfg;
}

AppConfig loadConfig(const std::filesystem::path& path) {
  std::string text;
  try {
    text = readTextFile(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parseConfig(text);
}

nlohmann::json configToJson(const AppConfig& cfg) {
  const auto& box = cfg.dataset.box;
  return {{"grid", gridToJson(cfg.grid)},
          {"quad_resolution", cfg.quad.resolution},
          {"dataset",
           {{"gamma_min", box.lower.gamma1()},
            {"gamma_max", box.upper.gamma1()},
            {"beta_min", box.lower.beta1()},
            {"beta_max", box.upper.beta1()},
            {"n_train", cfg.dataset.n_train},
            {"pool_train", cfg.dataset.pool_train},
            {"n_test", cfg.dataset.n_test},
            {"pool_test", cfg.dataset.pool_test},
            {"seed", cfg.dataset.seed}}},
          {"train", trainConfigToJson(cfg.train)}};
}

}  // namespace hardid
