#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>

namespace gammacontam {

using Rng = std::mt19937_64;

/// Independent stream for (master seed, stream id...). Stable across
/// platforms that share libstdc++'s seed_seq.
Rng make_rng(std::uint64_t master, std::uint64_t stream_a, std::uint64_t stream_b = 0);

/// Dirichlet(alpha) via normalized Gamma draws.
Eigen::VectorXd sample_dirichlet(std::span<const double> alpha, Rng& rng);

/// Inverse-Wishart(scale, dof) with density proportional to
/// |S|^{-(dof+M+1)/2} exp(-tr(scale S^{-1})/2); mean scale / (dof - M - 1).
/// Draws W ~ Wishart(scale^{-1}, dof) by the Bartlett decomposition and
/// returns W^{-1}.
Eigen::MatrixXd sample_inverse_wishart(const Eigen::MatrixXd& scale, double dof, Rng& rng);

/// Normal(mean, cov) through the Cholesky factor of cov.
Eigen::VectorXd sample_normal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng);

}  // namespace gammacontam
