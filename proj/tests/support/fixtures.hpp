#pragma once

#include "gammacontam/dpgmm.hpp"
#include "gammacontam/sampling.hpp"
#include "gammacontam/scorespace.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

namespace fixtures {

using gammacontam::Rng;

inline Eigen::MatrixXd gaussian_blob(int n, const Eigen::VectorXd& center, double sd, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd out(n, center.size());
  for (int i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < center.size(); ++j) out(i, j) = center(j) + sd * z(rng);
  return out;
}

inline Eigen::MatrixXd stack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

/// 2-4 unit-variance Gaussian clusters in d dimensions plus anomalies drawn
/// uniformly from the data's bounding box widened by `margin` on each side.
inline gammacontam::RawDataset planted_dataset(const std::string& name, int n, int d,
                                               double gamma, std::uint64_t seed,
                                               double margin = 4.0) {
  Rng rng(seed);
  std::uniform_int_distribution<int> nclusters(2, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int k = nclusters(rng);
  const int anomalies = static_cast<int>(std::lround(gamma * n));
  const int normals = n - anomalies;

  Eigen::MatrixXd centers(k, d);
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j) centers(c, j) = -6.0 + 12.0 * unit(rng);

  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd rows(n, d);
  std::vector<int> labels(n, 0);
  for (int i = 0; i < normals; ++i) {
    const int c = static_cast<int>(unit(rng) * k) % k;
    for (int j = 0; j < d; ++j) rows(i, j) = centers(c, j) + z(rng);
  }
  const Eigen::RowVectorXd lo = rows.topRows(normals).colwise().minCoeff().array() - margin;
  const Eigen::RowVectorXd hi = rows.topRows(normals).colwise().maxCoeff().array() + margin;
  for (int i = normals; i < n; ++i) {
    labels[i] = 1;
    for (int j = 0; j < d; ++j) rows(i, j) = lo(j) + (hi(j) - lo(j)) * unit(rng);
  }
  return gammacontam::RawDataset(name, rows, labels);
}

/// Ranked posterior with the given weights (as Dirichlet parameters scaled by
/// `concentration`) and one-dimensional NIW means `r`; tight covariances make
/// E[r] close to mean / (1 + sd).
inline gammacontam::MixturePosterior synthetic_posterior(const std::vector<double>& weights,
                                                         const std::vector<double>& means,
                                                         double concentration = 2000.0,
                                                         double variance = 0.01) {
  gammacontam::MixturePosterior post;
  post.dim = 1;
  double total = 0.0;
  for (double w : weights) total += w;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    gammacontam::MixtureComponent c;
    c.dirichlet_alpha = concentration * weights[k] / total;
    c.expected_weight = weights[k] / total;
    c.effective_count = c.dirichlet_alpha;
    c.slot = static_cast<Eigen::Index>(k);
    c.niw.mean = Eigen::VectorXd::Constant(1, means[k]);
    c.niw.strength = 1e4;
    c.niw.dof = 1e4;
    c.niw.scale = Eigen::MatrixXd::Constant(1, 1, variance * (c.niw.dof - 2.0));
    post.components.push_back(c);
  }
  return post;
}

}  // namespace fixtures
