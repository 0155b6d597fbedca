#pragma once

#include "gammacontam/sampling.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace gammacontam {

struct ScoreMatrix;

/// Truncated stick-breaking DP mixture with a Normal-Inverse-Wishart base
/// measure. Unset prior fields default to mean 0, scale identity and
/// dof M + 2 for the score dimension M.
struct DpgmmConfig {
  int max_components = 100;
  double concentration = 1.0;
  std::optional<Eigen::VectorXd> prior_mean;
  std::optional<Eigen::MatrixXd> prior_scale;
  std::optional<double> prior_dof;
  double prior_mean_strength = 1.0;
  int max_iter = 500;
  int min_iter = 10;
  double elbo_tol = 1e-6;  // relative change; looser values stop before spare components empty
  double reg_covar = 1e-6;
  std::uint64_t seed = 0;

  /// Throws InputError when a constraint fails for dimension `dim`.
  void validate(Eigen::Index dim) const;
};

/// NIW(mean, strength, scale, dof): Sigma ~ IW(scale, dof),
/// mu | Sigma ~ N(mean, Sigma / strength).
struct NiwParams {
  Eigen::VectorXd mean;
  double strength = 1.0;
  Eigen::MatrixXd scale;
  double dof = 0.0;

  /// E[Sigma] = scale / (dof - M - 1); requires dof > M + 1.
  Eigen::MatrixXd expected_covariance() const;
};

struct FitDiagnostics {
  std::vector<double> elbo_trace;
  int iterations = 0;
  bool converged = false;
  std::uint64_t seed_used = 0;
};

/// Raw coordinate-ascent output over all max_components slots.
struct VariationalFit {
  Eigen::MatrixXd responsibilities;  // N x K, rows sum to 1
  Eigen::VectorXd counts;            // soft counts N_k
  std::vector<NiwParams> components;
  Eigen::VectorXd stick_a, stick_b;  // q(v_k) = Beta(a_k, b_k), k < K - 1
  double concentration = 1.0;
  FitDiagnostics diagnostics;

  /// Slots holding at least one observation under argmax assignment
  /// (ties go to the lowest slot), ascending.
  std::vector<Eigen::Index> active_slots() const;
};

struct MixtureComponent {
  double dirichlet_alpha = 0.0;
  NiwParams niw;
  double expected_weight = 0.0;
  double effective_count = 0.0;
  Eigen::Index slot = 0;  // index in the raw fit
};

/// Finite Dirichlet mixture over the active components.
struct MixturePosterior {
  Eigen::Index dim = 0;
  std::vector<MixtureComponent> components;

  std::size_t size() const { return components.size(); }
  std::vector<double> alphas() const;
  nlohmann::json to_json() const;
};

/// Mean-field coordinate ascent. Each iteration updates the stick and NIW
/// factors from the responsibilities, then the responsibilities; the ELBO
/// is recorded after each iteration. Initial responsibilities assign each
/// point to the nearest of min(K, N) seed points drawn without replacement.
VariationalFit fit_variational(const Eigen::MatrixXd& scores, const DpgmmConfig& config);

/// Keeps the active slots and spreads the inactive soft counts and the
/// concentration evenly over them:
///   effective_count_k = N_k + inactive / K_active
///   alpha_k = effective_count_k + concentration / K_active.
MixturePosterior collapse_active(const VariationalFit& fit, const DpgmmConfig& config);

/// fit_variational followed by collapse_active.
std::pair<MixturePosterior, FitDiagnostics> fit(const ScoreMatrix& scores,
                                                const DpgmmConfig& config);

struct ComponentDraw {
  Eigen::VectorXd weights;  // pi over all components
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// pi ~ Dir(alpha), Sigma_k ~ IW(scale_k, dof_k), mu_k ~ N(mean_k, Sigma_k / strength_k).
ComponentDraw sample_component_params(const MixturePosterior& post, std::size_t k, Rng& rng);

/// Draws (mu_k, Sigma_k) from one component's NIW.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> sample_niw(const NiwParams& niw, Rng& rng);

}  // namespace gammacontam
