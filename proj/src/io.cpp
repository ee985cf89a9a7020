#include "masga/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "masga/errors.hpp"
#include "masga/rng.hpp"

namespace masga {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  if (!parse_double(value, v)) throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("'" + key + "' expects a nonnegative integer, got '" + value + "'");
  }
  return v;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

Dataset parse_dataset(std::istream& is, const LoadOptions& options) {
  std::vector<std::vector<double>> table;
  std::string line;
  std::size_t row = 0;
  std::size_t width = 0;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    std::vector<double> values(cells.size());
    bool numeric = true;
    std::size_t bad_column = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_double(cells[c], values[c])) {
        numeric = false;
        bad_column = c + 1;
        break;
      }
    }
    if (!numeric) {
      if (table.empty() && width == 0) {
        width = cells.size();  // header
        continue;
      }
      throw ParseError(row, bad_column,
                       "row " + std::to_string(row) + ", column " + std::to_string(bad_column) +
                           ": '" + cells[bad_column - 1] + "' is not a number");
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw ParseError(row, std::min(cells.size(), width) + 1,
                       "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                           " columns, expected " + std::to_string(width));
    }
    table.push_back(std::move(values));
  }
  if (table.empty()) throw ParseError(row, 0, "dataset has no data rows");
  const std::size_t features = options.labelled ? width - 1 : width;
  if (features == 0) throw ParseError(1, width, "dataset needs at least one feature column");

  Dataset data;
  const auto m = static_cast<Eigen::Index>(table.size());
  data.rows.resize(m, static_cast<Eigen::Index>(features));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < features; ++j) {
      data.rows(i, static_cast<Eigen::Index>(j)) = table[static_cast<std::size_t>(i)][j];
    }
  }
  if (options.labelled) {
    std::vector<double> distinct;
    for (const auto& r : table) {
      if (std::find(distinct.begin(), distinct.end(), r.back()) == distinct.end()) {
        distinct.push_back(r.back());
      }
    }
    std::sort(distinct.begin(), distinct.end());
    if (distinct.size() > 2) {
      throw TargetError("target column has " + std::to_string(distinct.size()) +
                        " distinct values, expected a binary target");
    }
    double positive = distinct.back();
    if (distinct.size() == 1) {
      const double v = distinct.front();
      if (v != 1.0 && v != 0.0 && v != -1.0) {
        throw TargetError("single-valued target column must be 0, 1 or -1");
      }
      positive = 1.0;
    }
    data.targets.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      data.targets[i] = table[static_cast<std::size_t>(i)].back() == positive ? 1.0 : -1.0;
    }
  }
  if (options.standardize) {
    for (Eigen::Index j = 0; j < data.rows.cols(); ++j) {
      auto col = data.rows.col(j);
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().mean());
      col.array() -= mean;
      if (sd > 0) col /= sd;
    }
  }
  return data;
}

Dataset load_dataset(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
  return parse_dataset(in, options);
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  for (Eigen::Index i = 0; i < data.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.rows.cols(); ++j) {
      if (j > 0) os << ',';
      os << fmt(data.rows(i, j));
    }
    if (data.has_targets()) os << ',' << (data.targets[i] > 0 ? 1 : 0);
    os << '\n';
  }
}

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "logistic") return SyntheticKind::kLogistic;
  if (name == "mixture") return SyntheticKind::kMixture;
  if (name == "ou") return SyntheticKind::kOu;
  throw ConfigError("unknown synthetic data kind '" + name + "' (logistic|mixture|ou)");
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.m == 0 || spec.d == 0) throw DimensionError("synthetic data needs m >= 1 and d >= 1");
  NoiseSource noise(spec.seed, StreamId{0, 0, 0, StreamRole::kDataGeneration});
  const auto m = static_cast<Eigen::Index>(spec.m);
  Dataset data;
  switch (spec.kind) {
    case SyntheticKind::kLogistic: {
      const auto d = static_cast<Eigen::Index>(spec.d);
      Eigen::VectorXd truth(d);
      noise.fill_gaussian(truth);
      data.rows.resize(m, d);
      data.targets.resize(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) data.rows(i, j) = noise.gaussian();
      }
      for (Eigen::Index j = 0; j < d; ++j) {
        auto col = data.rows.col(j);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().mean());
        col.array() -= mean;
        if (sd > 0) col /= sd;
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        const double p = 1.0 / (1.0 + std::exp(-data.rows.row(i).dot(truth)));
        data.targets[i] = noise.uniform01() < p ? 1.0 : -1.0;
      }
      break;
    }
    case SyntheticKind::kMixture: {
      if (spec.d != 2) throw DimensionError("mixture data is 2-dimensional");
      if (!(spec.mixture_variance > 0)) throw RangeError("mixture variance must be positive");
      const double sd = std::sqrt(spec.mixture_variance);
      data.rows.resize(m, 2);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < 2; ++j) {
          const double centre = noise.uniform01() < 0.5 ? 0.0 : 1.0;
          data.rows(i, j) = centre + sd * noise.gaussian();
        }
      }
      break;
    }
    case SyntheticKind::kOu: {
      const auto d = static_cast<Eigen::Index>(spec.d);
      data.rows.resize(m, d);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) data.rows(i, j) = 1.0 + noise.gaussian();
      }
      break;
    }
  }
  return data;
}

// ---------------------------------------------------------------------------

std::uint64_t ExperimentConfig::n0() const {
  if (!(h0 > 0) || !(t > 0)) throw ConfigError("h0 and t must be positive");
  const double steps = t / h0;
  const double rounded = std::round(steps);
  if (rounded < 1 || std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) {
    throw ConfigError("t / h0 = " + fmt(steps) + " is not a positive integer");
  }
  return static_cast<std::uint64_t>(rounded);
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> models{"logistic_gaussian", "logistic_mixture",
                                               "gaussian_mixture_2d", "ou"};
  static const std::vector<std::string> estimators{"masga", "mimc_plain", "amlmc_sub",
                                                   "amlmc_disc", "mc", "sgld_cv"};
  if (std::find(models.begin(), models.end(), model) == models.end()) {
    throw ConfigError("unknown model '" + model + "'");
  }
  if (std::find(estimators.begin(), estimators.end(), estimator) == estimators.end()) {
    throw ConfigError("unknown estimator '" + estimator + "'");
  }
  if (epsilons.empty()) throw ConfigError("epsilon list is empty");
  for (double e : epsilons) {
    if (!(e > 0)) throw ConfigError("epsilon values must be positive");
  }
  if (s0 == 0) throw ConfigError("s0 must be positive");
  if (m == 0 || d == 0) throw ConfigError("m and d must be positive");
  n0();
  AdaptiveConfig{epsilons.front(), n_pilot, L_init, L_max, alpha_assumed, threads}.validate();
  TestFunction::parse(f);
  if (x0 != "origin" && x0 != "sgd_mode") {
    for (const auto& cell : split(x0, ',')) to_double("x0", cell);
  }
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "preset") {
    c = preset(value);
  } else if (key == "model") {
    c.model = value;
  } else if (key == "dataset") {
    c.dataset = value;
  } else if (key == "m") {
    c.m = to_uint(key, value);
  } else if (key == "d") {
    c.d = to_uint(key, value);
  } else if (key == "data_seed") {
    c.data_seed = to_uint(key, value);
  } else if (key == "s0") {
    c.s0 = to_uint(key, value);
  } else if (key == "h0") {
    c.h0 = to_double(key, value);
  } else if (key == "t") {
    c.t = to_double(key, value);
  } else if (key == "f") {
    c.f = value;
  } else if (key == "estimator") {
    c.estimator = value;
  } else if (key == "epsilon" || key == "eps") {
    c.epsilons.clear();
    for (const auto& cell : split(value, ',')) c.epsilons.push_back(to_double(key, cell));
  } else if (key == "seed") {
    c.seed = to_uint(key, value);
  } else if (key == "x0") {
    c.x0 = value;
  } else if (key == "replacement") {
    c.mode = replacement_mode_from_string(value);
  } else if (key == "n_pilot") {
    c.n_pilot = to_uint(key, value);
  } else if (key == "L_init") {
    c.L_init = static_cast<std::uint32_t>(to_uint(key, value));
  } else if (key == "L_max") {
    c.L_max = static_cast<std::uint32_t>(to_uint(key, value));
  } else if (key == "alpha_assumed") {
    c.alpha_assumed = to_double(key, value);
  } else if (key == "threads") {
    c.threads = static_cast<unsigned>(to_uint(key, value));
  } else if (key == "beta") {
    c.beta = to_double(key, value);
  } else if (key == "mixture_variance") {
    c.mixture_variance = to_double(key, value);
  } else if (key == "ou_alpha") {
    c.ou_alpha = to_double(key, value);
  } else if (key == "mode_iterations") {
    c.mode_iterations = static_cast<int>(to_uint(key, value));
  } else if (key == "mode_step") {
    c.mode_step = to_double(key, value);
  } else if (key == "mc_level") {
    c.mc_level = static_cast<std::uint32_t>(to_uint(key, value));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig c;
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(row) + " is not key=value: '" + line + "'");
    }
    try {
      apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(row) + ": " + e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::vector<std::string> preset_names() {
  return {"logistic-small", "amlmc-logistic", "mixture", "sgld-cv"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "logistic-small") {
    c.epsilons = {0.2, 0.1, 0.05, 0.025};
  } else if (name == "amlmc-logistic") {
    c.estimator = "amlmc_sub";
    c.h0 = 0.005 / 16;
    c.t = 0.5;
    c.epsilons = {0.2, 0.1, 0.05, 0.025};
  } else if (name == "mixture") {
    c.model = "gaussian_mixture_2d";
    c.estimator = "amlmc_sub";
    c.m = 200;
    c.d = 2;
    c.s0 = 2;
    c.h0 = 1.0;
    c.t = 2000.0;
    c.x0 = "origin";
    c.L_max = 6;
    c.epsilons = {0.2, 0.1};
  } else if (name == "sgld-cv") {
    c.estimator = "sgld_cv";
    c.h0 = 0.5;
    c.t = 50.0;
    c.epsilons = {0.2, 0.1, 0.05, 0.025};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------

std::string report_to_json(const EstimatorReport& r) {
  json j;
  j["estimate"] = number_or_null(r.estimate);
  j["bias_estimate"] = number_or_null(r.bias_estimate);
  j["alpha_hat"] = {number_or_null(r.rates.alpha[0]), number_or_null(r.rates.alpha[1])};
  j["beta_hat"] = {number_or_null(r.rates.beta[0]), number_or_null(r.rates.beta[1])};
  j["gamma"] = {number_or_null(r.rates.gamma[0]), number_or_null(r.rates.gamma[1])};
  j["converged"] = r.converged;
  json alloc = json::array();
  for (const auto& [level, n] : r.allocations) {
    alloc.push_back({{"ell1", level.ell1}, {"ell2", level.ell2}, {"n", n}});
  }
  j["allocations"] = alloc;
  j["total_cost"] = number_or_null(r.total_cost);
  j["levels_used"] = r.levels_used;
  j["std_error"] = number_or_null(r.std_error);
  return j.dump(2) + "\n";
}

EstimatorReport report_from_json(const std::string& text) {
  EstimatorReport r;
  try {
    const json j = json::parse(text);
    r.estimate = number_from(j.at("estimate"));
    r.bias_estimate = number_from(j.at("bias_estimate"));
    for (std::size_t k = 0; k < 2; ++k) {
      r.rates.alpha[k] = number_from(j.at("alpha_hat").at(k));
      r.rates.beta[k] = number_from(j.at("beta_hat").at(k));
      r.rates.gamma[k] = number_from(j.at("gamma").at(k));
    }
    r.converged = j.at("converged").get<bool>();
    for (const auto& a : j.at("allocations")) {
      r.allocations[MultiIndex{a.at("ell1").get<std::uint32_t>(), a.at("ell2").get<std::uint32_t>()}] =
          a.at("n").get<std::uint64_t>();
    }
    r.total_cost = number_from(j.at("total_cost"));
    if (j.contains("levels_used")) r.levels_used = j.at("levels_used").get<std::uint32_t>();
    if (j.contains("std_error")) r.std_error = number_from(j.at("std_error"));
  } catch (const json::exception& e) {
    throw ParseError(0, 0, std::string("malformed report.json: ") + e.what());
  }
  return r;
}

std::string format_summary(const EstimatorReport& r) {
  std::ostringstream os;
  os << "estimate       " << fmt(r.estimate) << '\n'
     << "bias estimate  " << fmt(r.bias_estimate) << '\n'
     << "total cost     " << fmt(r.total_cost) << '\n'
     << "alpha_hat      (" << fmt(r.rates.alpha[0]) << ", " << fmt(r.rates.alpha[1]) << ")\n"
     << "beta_hat       (" << fmt(r.rates.beta[0]) << ", " << fmt(r.rates.beta[1]) << ")\n"
     << "gamma          (" << fmt(r.rates.gamma[0]) << ", " << fmt(r.rates.gamma[1]) << ")\n"
     << "converged      " << (r.converged ? "yes" : "no (L_max reached)") << '\n'
     << "allocations\n";
  for (const auto& [level, n] : r.allocations) os << "  " << level << "  " << n << '\n';
  return os.str();
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "eps,estimate,total_cost,cost_times_eps2,L\n";
  for (const auto& r : rows) {
    os << fmt(r.eps) << ',' << fmt(r.estimate) << ',' << fmt(r.total_cost) << ','
       << fmt(r.total_cost * r.eps * r.eps) << ',' << r.L << '\n';
  }
}

}  // namespace masga
