#include "gammacontam/sampling.hpp"

#include "gammacontam/error.hpp"

#include <cmath>

namespace gammacontam {

Rng make_rng(std::uint64_t master, std::uint64_t stream_a, std::uint64_t stream_b) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream_a), static_cast<std::uint32_t>(stream_a >> 32),
                    static_cast<std::uint32_t>(stream_b), static_cast<std::uint32_t>(stream_b >> 32)};
  return Rng(seq);
}

Eigen::VectorXd sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(alpha.size()));
  double total = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    std::gamma_distribution<double> gamma(alpha[k], 1.0);
    out(static_cast<Eigen::Index>(k)) = gamma(rng);
    total += out(static_cast<Eigen::Index>(k));
  }
  if (!(total > 0.0)) {
    // Every Gamma draw underflowed (tiny alphas): put the mass on the largest alpha.
    out.setZero();
    std::size_t best = 0;
    for (std::size_t k = 1; k < alpha.size(); ++k)
      if (alpha[k] > alpha[best]) best = k;
    out(static_cast<Eigen::Index>(best)) = 1.0;
    return out;
  }
  return out / total;
}

Eigen::MatrixXd sample_inverse_wishart(const Eigen::MatrixXd& scale, double dof, Rng& rng) {
  const Eigen::Index m = scale.rows();
  // W = L A A^T L^T with L L^T = scale^{-1}. Then W^{-1} = L^{-T} (A A^T)^{-1} L^{-1}.
  const Eigen::LLT<Eigen::MatrixXd> scale_llt(scale);
  if (scale_llt.info() != Eigen::Success) throw NumericalError("inverse-Wishart scale is not SPD");
  const Eigen::MatrixXd precision = scale_llt.solve(Eigen::MatrixXd::Identity(m, m));
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(precision).matrixL();

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    std::chi_squared_distribution<double> chi2(dof - static_cast<double>(i));
    a(i, i) = std::sqrt(chi2(rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  const Eigen::MatrixXd la = l * a;
  const Eigen::MatrixXd wishart = la * la.transpose();
  Eigen::MatrixXd out = wishart.llt().solve(Eigen::MatrixXd::Identity(m, m));
  return 0.5 * (out + out.transpose());
}

Eigen::VectorXd sample_normal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("normal covariance is not SPD");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return mean + llt.matrixL() * z;
}

}  // namespace gammacontam
