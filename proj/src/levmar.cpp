#include "gammacontam/levmar.hpp"

#include <cmath>

namespace gammacontam {

LevMarResult levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd x0,
                                 const LevMarOptions& options) {
  LevMarResult result;
  result.x = std::move(x0);
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  fn(result.x, r, j);
  double cost = r.squaredNorm();
  double damping = options.initial_damping;

  for (int it = 0; it < options.max_iter; ++it) {
    result.iterations = it;
    if (std::sqrt(cost) < options.residual_tol) {
      result.converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd grad = j.transpose() * r;
    Eigen::VectorXd scale = jtj.diagonal().cwiseMax(1e-12);

    bool accepted = false;
    while (damping < 1e16) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal() += damping * scale;
      const Eigen::VectorXd step = lhs.ldlt().solve(-grad);
      if (!step.allFinite()) {
        damping *= 10.0;
        continue;
      }
      const Eigen::VectorXd trial = result.x + step;
      Eigen::VectorXd r_trial;
      Eigen::MatrixXd j_trial;
      fn(trial, r_trial, j_trial);
      const double trial_cost = r_trial.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double step_norm = step.norm();
        result.x = trial;
        r = std::move(r_trial);
        j = std::move(j_trial);
        cost = trial_cost;
        damping = std::max(damping / 10.0, 1e-15);
        accepted = true;
        if (step_norm < options.step_tol * (1.0 + result.x.norm())) it = options.max_iter;
        break;
      }
      damping *= 10.0;
    }
    if (!accepted) break;
  }
  result.residual_norm = std::sqrt(cost);
  result.converged = result.residual_norm < options.residual_tol;
  return result;
}

}  // namespace gammacontam
