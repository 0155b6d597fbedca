#pragma once

#include "gammacontam/dpgmm.hpp"
#include "gammacontam/sampling.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace gammacontam {

/// Mean over dimensions of mu_j / (1 + sqrt(Sigma_jj)). Off-diagonal
/// covariance entries are ignored.
double representative_value(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

struct ComponentOrdering {
  std::vector<std::size_t> order;  // most anomalous first
  std::vector<double> expected_r;  // indexed by component, not by rank

  /// expected_r permuted into rank order.
  std::vector<double> ranked_r() const;
};

/// Monte Carlo E[r(mu_k, Sigma_k)] under each component's NIW, sorted
/// decreasing. Ties go to the larger expected weight, then the lower index.
ComponentOrdering order_components(const MixturePosterior& post, int mc_draws,
                                   std::uint64_t seed);

/// Same ordering rule applied to precomputed expected r values.
ComponentOrdering order_by_expected_r(const MixturePosterior& post, std::vector<double> expected_r);

/// Components permuted into ranked order.
MixturePosterior apply_ordering(const MixturePosterior& post, const ComponentOrdering& ordering);

struct SigmoidParams {
  double tau = 0.0;
  double delta = 0.0;
  double t = 0.15;
  double p0 = 0.01;
  double p_high = 0.01;
  bool solved = false;
  bool saturated = false;      // p_high above what any finite (tau, delta) reaches
  bool monotone = true;        // conditionals non-increasing along the ranking
  int retries_used = 0;
  double residual_norm = 0.0;
};

/// P(c_k | c_{k-1}) = 1 / (1 + exp(tau + delta * r)).
double conditional_probability(double r, double tau, double delta);
double conditional_probability(double r, const SigmoidParams& params);

/// P(C* = k) for k = 0..K from P(c_1), P(c_2|c_1), ..., P(c_K|c_{K-1}).
/// P(C* = 0) = 1 - p_1 and p_{K+1} = 0.
std::vector<double> joint_probabilities(std::span<const double> conditionals);

/// K' = max{k : sum_{j<=k} E[pi_j] < cap} over ranked expected weights.
/// A cap of 1 or more keeps every component. Throws CalibrationInfeasible
/// when E[pi_1] >= cap.
std::size_t truncation_length(std::span<const double> ranked_weights, double cap);

/// Zeroes the conditionals beyond K' for a ranked posterior.
std::vector<double> truncate_conditionals(const MixturePosterior& ranked,
                                          std::span<const double> conditionals, double cap);

/// P(sum_{j<=k} pi_j >= t) under Dir(alpha): the upper tail of
/// Beta(sum_{j<=k} alpha_j, sum_{j>k} alpha_j). `k` counts components (1-based).
double cumulative_weight_tail(std::span<const double> alphas, std::size_t k, double t);

struct CalibrationTargets {
  double p0 = 0.01;
  double p_high = 0.01;
  double t = 0.15;
  double cap = 0.25;

  void validate() const;
};

/// P(gamma >= t) at the given (tau, delta) with conditionals evaluated at
/// the ranked expected r values and truncated after K' components.
double high_contamination_probability(const MixturePosterior& ranked,
                                      std::span<const double> ranked_r, double tau,
                                      double delta, double t, double cap);

/// Solves p0 = 1 - P(c_1) and p_high = P(gamma >= t) for (tau, delta).
/// Throws CalibrationInfeasible when E[pi_1] >= cap or p_high < P(pi_1 >= t).
SigmoidParams calibrate(const MixturePosterior& ranked, std::span<const double> ranked_r,
                        const CalibrationTargets& targets);

/// Provenance of one restart.
struct RestartRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  int attempts = 0;
  bool exhausted = false;
  std::size_t active_components = 0;
  std::size_t truncation = 0;
  SigmoidParams sigmoid;
  int vi_iterations = 0;
  bool vi_converged = false;
  std::size_t zero_draws = 0;
  std::size_t capped_draws = 0;
};

/// Monte Carlo sample set of gamma, including draws at the gamma = 0 atom.
class GammaPosterior {
 public:
  GammaPosterior() = default;
  GammaPosterior(std::vector<double> samples, double zero_mass, double cap);

  const std::vector<double>& samples() const { return samples_; }
  double zero_mass() const { return zero_mass_; }
  double cap() const { return cap_; }
  double mean() const;
  double std() const;
  double quantile(double u) const;

  std::vector<RestartRecord> restarts;

 private:
  std::vector<double> samples_;
  std::vector<double> sorted_;
  double zero_mass_ = 0.0;
  double cap_ = 0.25;
};

/// Posterior mean, zero atom included.
double point_estimate(const GammaPosterior& posterior);

struct GammaDraws {
  std::vector<double> samples;
  std::size_t zero_draws = 0;
  std::size_t capped_draws = 0;
};

/// Draws gamma from one ranked fit: per draw pi ~ Dir(alpha), (mu_k, Sigma_k)
/// from each NIW, conditionals from the sampled r values (zero past K'),
/// C* from the joint probabilities, gamma = sum_{j<=C*} pi_j. Values above
/// `cap` are clamped to it.
GammaDraws sample_gamma(const MixturePosterior& ranked, const SigmoidParams& params,
                        std::size_t truncation, std::size_t draws, double cap, Rng& rng);

nlohmann::json to_json(const SigmoidParams& params);
nlohmann::json to_json(const GammaPosterior& posterior);

}  // namespace gammacontam
