#pragma once

#include "gammacontam/dpgmm.hpp"
#include "gammacontam/gammapost.hpp"

#include <cstdint>
#include <optional>

namespace gammacontam {

struct ScoreMatrix;

struct EstimateConfig {
  DpgmmConfig dpgmm;
  CalibrationTargets targets;
  int restarts = 10;
  int samples_per_restart = 1000;
  int max_attempts = 100;  // VI refits per restart when calibration is infeasible
  int order_draws = 1000;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: default_thread_count()

  void validate() const;
};

/// One restart, already calibrated.
struct CalibratedFit {
  MixturePosterior ranked;
  std::vector<double> ranked_r;
  std::size_t truncation = 0;
  SigmoidParams sigmoid;
  FitDiagnostics diagnostics;
};

/// Fits, ranks and calibrates with refits on CalibrationInfeasible. Returns
/// nullopt when every attempt was infeasible; `attempts` receives the count.
std::optional<CalibratedFit> calibrated_fit(const ScoreMatrix& scores, const EstimateConfig& config,
                                            std::size_t restart, int& attempts);

/// Full estimate: `restarts` independent calibrated fits, each contributing
/// `samples_per_restart` draws, concatenated in restart order. A restart
/// whose attempts are exhausted contributes draws at gamma = 0. The result
/// does not depend on the thread count.
GammaPosterior estimate_posterior(const ScoreMatrix& scores, const EstimateConfig& config);

/// True when every restart exhausted its attempts.
bool calibration_exhausted(const GammaPosterior& posterior);

}  // namespace gammacontam
