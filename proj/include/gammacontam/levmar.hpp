#pragma once

#include <Eigen/Dense>

#include <functional>

namespace gammacontam {

/// Fills residuals and the Jacobian (rows: residuals, cols: parameters).
using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& residual,
                                      Eigen::MatrixXd& jacobian)>;

struct LevMarOptions {
  int max_iter = 200;
  double residual_tol = 1e-10;
  double step_tol = 1e-15;
  double initial_damping = 1e-3;
};

struct LevMarResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Gauss-Newton with Marquardt diagonal scaling.
LevMarResult levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd x0,
                                 const LevMarOptions& options = {});

}  // namespace gammacontam
