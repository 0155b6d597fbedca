#include "gammacontam/estimator.hpp"

#include "gammacontam/error.hpp"
#include "gammacontam/parallel.hpp"
#include "gammacontam/scorespace.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace gammacontam {
namespace {

std::uint64_t attempt_seed(std::uint64_t master, std::size_t restart, int attempt) {
  Rng rng = make_rng(master, restart, static_cast<std::uint64_t>(attempt));
  return rng();
}

}  // namespace

void EstimateConfig::validate() const {
  targets.validate();
  if (restarts < 1) throw InputError("restarts must be >= 1");
  if (samples_per_restart < 1) throw InputError("samples per restart must be >= 1");
  if (max_attempts < 1) throw InputError("max attempts must be >= 1");
  if (order_draws < 1) throw InputError("order draws must be >= 1");
}

std::optional<CalibratedFit> calibrated_fit(const ScoreMatrix& scores, const EstimateConfig& config,
                                            std::size_t restart, int& attempts) {
  attempts = 0;
  for (int a = 0; a < config.max_attempts; ++a) {
    attempts = a + 1;
    DpgmmConfig dp = config.dpgmm;
    dp.seed = attempt_seed(config.seed, restart, a);
    auto [post, diag] = fit(scores, dp);
    const auto ordering = order_components(post, config.order_draws, dp.seed);
    CalibratedFit out;
    out.ranked = apply_ordering(post, ordering);
    out.ranked_r = ordering.ranked_r();
    out.diagnostics = std::move(diag);
    try {
      std::vector<double> weights;
      for (const auto& c : out.ranked.components) weights.push_back(c.expected_weight);
      out.truncation = truncation_length(weights, config.targets.cap);
      out.sigmoid = calibrate(out.ranked, out.ranked_r, config.targets);
      out.sigmoid.retries_used = a;
      return out;
    } catch (const CalibrationInfeasible& e) {
      spdlog::debug("restart {} attempt {}: {}", restart, a, e.what());
    }
  }
  return std::nullopt;
}

GammaPosterior estimate_posterior(const ScoreMatrix& scores, const EstimateConfig& config) {
  config.validate();
  const auto restarts = static_cast<std::size_t>(config.restarts);
  const auto per = static_cast<std::size_t>(config.samples_per_restart);
  std::vector<GammaDraws> draws(restarts);
  std::vector<RestartRecord> records(restarts);

  const std::size_t threads = config.threads ? config.threads : default_thread_count();
  parallel_for(restarts, threads, [&](std::size_t r) {
    RestartRecord& rec = records[r];
    rec.index = r;
    rec.seed = attempt_seed(config.seed, r, 0);
    auto calibrated = calibrated_fit(scores, config, r, rec.attempts);
    if (!calibrated) {
      rec.exhausted = true;
      rec.zero_draws = per;
      draws[r].samples.assign(per, 0.0);
      draws[r].zero_draws = per;
      spdlog::warn("restart {}: calibration infeasible after {} attempts; gamma set to 0", r,
                   rec.attempts);
      return;
    }
    rec.seed = calibrated->diagnostics.seed_used;
    rec.active_components = calibrated->ranked.size();
    rec.truncation = calibrated->truncation;
    rec.sigmoid = calibrated->sigmoid;
    rec.vi_iterations = calibrated->diagnostics.iterations;
    rec.vi_converged = calibrated->diagnostics.converged;
    Rng rng = make_rng(config.seed, r, 0x5a3b1e);
    draws[r] = sample_gamma(calibrated->ranked, calibrated->sigmoid, calibrated->truncation, per,
                            config.targets.cap, rng);
    rec.zero_draws = draws[r].zero_draws;
    rec.capped_draws = draws[r].capped_draws;
  });

  std::vector<double> samples;
  samples.reserve(restarts * per);
  std::size_t zeros = 0;
  for (const auto& d : draws) {
    samples.insert(samples.end(), d.samples.begin(), d.samples.end());
    zeros += d.zero_draws;
  }
  const double zero_mass = static_cast<double>(zeros) / static_cast<double>(samples.size());
  GammaPosterior out(std::move(samples), zero_mass, config.targets.cap);
  out.restarts = std::move(records);
  return out;
}

bool calibration_exhausted(const GammaPosterior& posterior) {
  return !posterior.restarts.empty() &&
         std::all_of(posterior.restarts.begin(), posterior.restarts.end(),
                     [](const RestartRecord& r) { return r.exhausted; });
}

}  // namespace gammacontam
