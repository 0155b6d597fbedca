#pragma once

#include "gammacontam/estimator.hpp"
#include "gammacontam/eval.hpp"
#include "gammacontam/gammapost.hpp"
#include "gammacontam/thresholds.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gammacontam {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunConfig {
  std::string command;
  std::filesystem::path input;
  std::filesystem::path scores;
  std::vector<std::string> detectors{"knn", "lof", "iforest", "hbos"};
  std::vector<std::filesystem::path> externals;
  double p0 = 0.01;
  double p_high = 0.01;
  double t = 0.15;
  double cap = 0.25;
  int restarts = 10;
  int samples = 1000;
  int max_components = 100;
  int max_attempts = 100;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::vector<std::string> methods;  // empty: all threshold methods
  bool write_samples = false;

  void validate() const;
  EstimateConfig estimate_config() const;
  std::vector<ThresholdMethod> threshold_methods() const;
  /// Config echo for output headers; thread count is deliberately absent.
  nlohmann::json to_json() const;
};

struct BenchmarkResult {
  std::vector<EvalRow> rows;
  std::vector<CalibrationPoint> calibration;
  std::vector<MethodRank> ranks;
};

/// Runs the gammagmm estimate plus the selected threshold methods on every
/// CSV dataset in `config.input` (sorted by file name).
BenchmarkResult run_benchmark(const RunConfig& config);

/// Entry point shared by the executable and the tests. Returns the exit
/// code: 0 success, 1 computational failure, 2 usage or I/O error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gammacontam
