#include "gammacontam/dpgmm.hpp"

#include "gammacontam/error.hpp"
#include "gammacontam/scorespace.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gammacontam {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double digamma(double x) { return boost::math::digamma(x); }

double log_multigamma(double a, Index m) {
  double out = 0.25 * static_cast<double>(m * (m - 1)) * std::log(std::numbers::pi);
  for (Index i = 0; i < m; ++i) out += std::lgamma(a - 0.5 * static_cast<double>(i));
  return out;
}

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

struct Prior {
  VectorXd mean;
  double strength;
  MatrixXd scale;
  double dof;
  double scale_logdet;
};

Prior resolve_prior(const DpgmmConfig& config, Index m) {
  Prior p;
  p.mean = config.prior_mean.value_or(VectorXd::Zero(m));
  p.strength = config.prior_mean_strength;
  p.scale = config.prior_scale.value_or(MatrixXd::Identity(m, m));
  p.dof = config.prior_dof.value_or(static_cast<double>(m) + 2.0);
  const Eigen::LLT<MatrixXd> llt(p.scale);
  p.scale_logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return p;
}

// Cholesky of a NIW scale, adding reg_covar to the diagonal once if needed.
Eigen::LLT<MatrixXd> factor_scale(MatrixXd& scale, double reg_covar, Index slot) {
  Eigen::LLT<MatrixXd> llt(scale);
  if (llt.info() == Eigen::Success) return llt;
  scale.diagonal().array() += reg_covar;
  llt.compute(scale);
  if (llt.info() != Eigen::Success)
    throw NumericalError("NIW scale of component " + std::to_string(slot) +
                         " is not positive definite");
  return llt;
}

double expected_log_det_precision(double dof, double scale_logdet, Index m) {
  double out = static_cast<double>(m) * std::numbers::ln2 - scale_logdet;
  for (Index i = 0; i < m; ++i) out += digamma(0.5 * (dof - static_cast<double>(i)));
  return out;
}

// Normal-Wishart KL(q || prior) written in inverse-Wishart scale terms.
double niw_kl(const NiwParams& q, const Eigen::LLT<MatrixXd>& q_llt, const Prior& p) {
  const Index m = q.mean.size();
  const double md = static_cast<double>(m);
  const double q_logdet = 2.0 * q_llt.matrixLLT().diagonal().array().log().sum();
  const double e_logdet = expected_log_det_precision(q.dof, q_logdet, m);

  const VectorXd diff = q.mean - p.mean;
  const double maha = diff.dot(q_llt.solve(diff));
  const double trace = q_llt.solve(p.scale).trace();

  const auto log_b = [md, m](double logdet, double dof) {
    return 0.5 * dof * logdet - 0.5 * dof * md * std::numbers::ln2 - log_multigamma(0.5 * dof, m);
  };

  const double e_log_q = 0.5 * md * std::log(q.strength) - 0.5 * md + log_b(q_logdet, q.dof) +
                         0.5 * (q.dof - md - 1.0) * e_logdet - 0.5 * q.dof * md;
  const double e_log_p = 0.5 * md * std::log(p.strength) - 0.5 * p.strength * md / q.strength -
                         0.5 * p.strength * q.dof * maha + log_b(p.scale_logdet, p.dof) +
                         0.5 * (p.dof - md - 1.0) * e_logdet - 0.5 * q.dof * trace;
  return e_log_q - e_log_p;
}

MatrixXd outer_features(const MatrixXd& x) {
  const Index m = x.cols();
  MatrixXd out(x.rows(), m * (m + 1) / 2);
  for (Index a = 0, p = 0; a < m; ++a)
    for (Index b = a; b < m; ++b, ++p) out.col(p) = x.col(a).cwiseProduct(x.col(b));
  return out;
}

class CoordinateAscent {
 public:
  CoordinateAscent(const MatrixXd& x, const DpgmmConfig& config)
      : x_(x), config_(config), prior_(resolve_prior(config, x.cols())),
        k_(config.max_components), outer_(outer_features(x)) {}

  void update_factors(const MatrixXd& resp, VariationalFit& fit) const {
    const Index m = x_.cols();
    fit.counts = resp.colwise().sum().transpose();
    const MatrixXd sums = resp.transpose() * x_;        // K x M
    const MatrixXd second = resp.transpose() * outer_;  // K x M(M+1)/2
    fit.components.resize(static_cast<std::size_t>(k_));
    for (Index k = 0; k < k_; ++k) {
      const double nk = fit.counts(k);
      NiwParams& c = fit.components[static_cast<std::size_t>(k)];
      c.strength = prior_.strength + nk;
      c.dof = prior_.dof + nk;
      if (nk > 0.0) {
        const VectorXd xbar = sums.row(k).transpose() / nk;
        MatrixXd scatter(m, m);
        for (Index a = 0, p = 0; a < m; ++a)
          for (Index b = a; b < m; ++b, ++p) scatter(a, b) = scatter(b, a) = second(k, p);
        scatter -= nk * xbar * xbar.transpose();
        const VectorXd shift = xbar - prior_.mean;
        c.mean = (prior_.strength * prior_.mean + nk * xbar) / c.strength;
        c.scale = prior_.scale + scatter + (prior_.strength * nk / c.strength) * shift * shift.transpose();
        c.scale = 0.5 * (c.scale + c.scale.transpose());
      } else {
        c.mean = prior_.mean;
        c.scale = prior_.scale;
      }
    }
    fit.stick_a.resize(k_ - 1);
    fit.stick_b.resize(k_ - 1);
    double tail = fit.counts.sum();
    for (Index k = 0; k + 1 < k_; ++k) {
      tail -= fit.counts(k);
      fit.stick_a(k) = 1.0 + fit.counts(k);
      fit.stick_b(k) = config_.concentration + std::max(tail, 0.0);
    }
  }

  // Updates the responsibilities in place and returns the ELBO at the new point.
  double update_responsibilities(VariationalFit& fit) const {
    const Index m = x_.cols();
    const double md = static_cast<double>(m);

    VectorXd e_log_pi(k_);
    double kl = 0.0;
    double acc = 0.0;
    for (Index k = 0; k < k_; ++k) {
      if (k + 1 < k_) {
        const double a = fit.stick_a(k), b = fit.stick_b(k);
        const double dsum = digamma(a + b);
        e_log_pi(k) = acc + digamma(a) - dsum;
        acc += digamma(b) - dsum;
        kl += log_beta_fn(1.0, config_.concentration) - log_beta_fn(a, b) +
              (a - 1.0) * digamma(a) + (b - config_.concentration) * digamma(b) +
              (1.0 - a + config_.concentration - b) * dsum;
      } else {
        e_log_pi(k) = acc;
      }
    }

    // (x - m)' W (x - m) = x'Wx - 2 x'Wm + m'Wm with W = scale^{-1}, for
    // every slot at once through the outer-product features.
    MatrixXd packed(outer_.cols(), k_);
    MatrixXd linear(m, k_);
    VectorXd offset(k_);
    for (Index k = 0; k < k_; ++k) {
      NiwParams& c = fit.components[static_cast<std::size_t>(k)];
      const auto llt = factor_scale(c.scale, config_.reg_covar, k);
      const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      const double e_logdet = expected_log_det_precision(c.dof, logdet, m);
      const MatrixXd w = llt.solve(MatrixXd::Identity(m, m));
      for (Index a = 0, p = 0; a < m; ++a)
        for (Index b = a; b < m; ++b, ++p) packed(p, k) = -0.5 * c.dof * (a == b ? w(a, a) : 2.0 * w(a, b));
      const VectorXd wm = w * c.mean;
      linear.col(k) = c.dof * wm;
      offset(k) = e_log_pi(k) + 0.5 * e_logdet - 0.5 * md / c.strength -
                  0.5 * md * std::log(2.0 * std::numbers::pi) - 0.5 * c.dof * c.mean.dot(wm);
      kl += niw_kl(c, llt, prior_);
    }
    MatrixXd log_rho = outer_ * packed + x_ * linear;
    log_rho.rowwise() += offset.transpose();

    const VectorXd peak = log_rho.rowwise().maxCoeff();
    log_rho.colwise() -= peak;
    fit.responsibilities = log_rho.array().exp().matrix();
    const VectorXd total = fit.responsibilities.rowwise().sum();
    fit.responsibilities.array().colwise() /= total.array();
    const double data_term = peak.sum() + total.array().log().sum();
    return data_term - kl;
  }

  MatrixXd initial_responsibilities(Rng& rng) const {
    const Index n = x_.rows();
    const Index seeds = std::min<Index>(k_, n);
    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index s = 0; s < seeds; ++s) {
      std::uniform_int_distribution<Index> pick(s, n - 1);
      std::swap(pool[static_cast<std::size_t>(s)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    MatrixXd resp = MatrixXd::Zero(n, k_);
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index s = 0; s < seeds; ++s) {
        const double d = (x_.row(i) - x_.row(pool[static_cast<std::size_t>(s)])).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = s;
        }
      }
      resp(i, best) = 1.0;
    }
    return resp;
  }

 private:
  const MatrixXd& x_;
  const DpgmmConfig& config_;
  Prior prior_;
  Index k_;
  MatrixXd outer_;  // N x M(M+1)/2, upper triangle of x x'
};

}  // namespace

void DpgmmConfig::validate(Index dim) const {
  if (max_components < 1) throw InputError("max_components must be >= 1");
  if (!(concentration > 0.0)) throw InputError("concentration must be positive");
  if (!(prior_mean_strength > 0.0)) throw InputError("prior mean strength must be positive");
  if (max_iter < 1) throw InputError("max_iter must be >= 1");
  if (!(elbo_tol > 0.0)) throw InputError("elbo_tol must be positive");
  if (!(reg_covar >= 0.0)) throw InputError("reg_covar must be non-negative");
  if (prior_mean && prior_mean->size() != dim) throw InputError("prior mean has wrong dimension");
  if (prior_dof && !(*prior_dof > static_cast<double>(dim) - 1.0))
    throw InputError("prior dof must exceed M - 1");
  if (prior_scale) {
    if (prior_scale->rows() != dim || prior_scale->cols() != dim)
      throw InputError("prior scale has wrong shape");
    if (!prior_scale->isApprox(prior_scale->transpose()))
      throw InputError("prior scale must be symmetric");
    if (Eigen::LLT<MatrixXd>(*prior_scale).info() != Eigen::Success)
      throw InputError("prior scale must be positive definite");
  }
}

MatrixXd NiwParams::expected_covariance() const {
  const double denom = dof - static_cast<double>(mean.size()) - 1.0;
  if (!(denom > 0.0)) throw NumericalError("inverse-Wishart mean requires dof > M + 1");
  return scale / denom;
}

std::vector<Index> VariationalFit::active_slots() const {
  std::vector<char> used(static_cast<std::size_t>(responsibilities.cols()), 0);
  for (Index i = 0; i < responsibilities.rows(); ++i) {
    Index best = 0;
    responsibilities.row(i).maxCoeff(&best);
    used[static_cast<std::size_t>(best)] = 1;
  }
  std::vector<Index> out;
  for (std::size_t k = 0; k < used.size(); ++k)
    if (used[k]) out.push_back(static_cast<Index>(k));
  return out;
}

std::vector<double> MixturePosterior::alphas() const {
  std::vector<double> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(c.dirichlet_alpha);
  return out;
}

nlohmann::json MixturePosterior::to_json() const {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : components) {
    nlohmann::json scale = nlohmann::json::array();
    for (Index r = 0; r < c.niw.scale.rows(); ++r) {
      std::vector<double> row;
      for (Index col = 0; col < c.niw.scale.cols(); ++col) row.push_back(c.niw.scale(r, col));
      scale.push_back(row);
    }
    comps.push_back({{"slot", c.slot},
                     {"alpha", c.dirichlet_alpha},
                     {"expected_weight", c.expected_weight},
                     {"effective_count", c.effective_count},
                     {"mean", std::vector<double>(c.niw.mean.data(), c.niw.mean.data() + c.niw.mean.size())},
                     {"strength", c.niw.strength},
                     {"scale", scale},
                     {"dof", c.niw.dof}});
  }
  return {{"dim", dim}, {"components", comps}};
}

VariationalFit fit_variational(const MatrixXd& scores, const DpgmmConfig& config) {
  if (scores.rows() == 0 || scores.cols() == 0) throw InputError("empty score matrix");
  config.validate(scores.cols());
  if (scores.rows() <= scores.cols())
    spdlog::warn("fitting {} points in {} dimensions", scores.rows(), scores.cols());

  const CoordinateAscent cavi(scores, config);
  Rng rng = make_rng(config.seed, 0x5eed);
  VariationalFit fit;
  fit.concentration = config.concentration;
  fit.diagnostics.seed_used = config.seed;
  MatrixXd resp = cavi.initial_responsibilities(rng);

  for (int it = 1; it <= config.max_iter; ++it) {
    cavi.update_factors(resp, fit);
    const double elbo = cavi.update_responsibilities(fit);
    resp = fit.responsibilities;
    auto& trace = fit.diagnostics.elbo_trace;
    trace.push_back(elbo);
    fit.diagnostics.iterations = it;
    if (it >= config.min_iter && trace.size() >= 2) {
      const double change = std::abs(elbo - trace[trace.size() - 2]);
      if (change < config.elbo_tol * std::abs(elbo)) {
        fit.diagnostics.converged = true;
        break;
      }
    }
  }
  // Leave the factors consistent with the final responsibilities.
  cavi.update_factors(resp, fit);
  fit.responsibilities = std::move(resp);
  return fit;
}

MixturePosterior collapse_active(const VariationalFit& fit, const DpgmmConfig& config) {
  const auto active = fit.active_slots();
  if (active.empty()) throw NumericalError("no active components");
  const double k_active = static_cast<double>(active.size());
  double inactive = fit.counts.sum();
  for (Index k : active) inactive -= fit.counts(k);
  inactive = std::max(inactive, 0.0);

  MixturePosterior post;
  post.dim = fit.components.front().mean.size();
  double total = 0.0;
  for (Index k : active) {
    MixtureComponent c;
    c.slot = k;
    c.niw = fit.components[static_cast<std::size_t>(k)];
    c.effective_count = fit.counts(k) + inactive / k_active;
    c.dirichlet_alpha = c.effective_count + config.concentration / k_active;
    total += c.dirichlet_alpha;
    post.components.push_back(std::move(c));
  }
  for (auto& c : post.components) c.expected_weight = c.dirichlet_alpha / total;
  return post;
}

std::pair<MixturePosterior, FitDiagnostics> fit(const ScoreMatrix& scores,
                                                const DpgmmConfig& config) {
  if (!scores.transformed) spdlog::warn("fitting an untransformed score matrix");
  auto raw = fit_variational(scores.values, config);
  auto post = collapse_active(raw, config);
  return {std::move(post), std::move(raw.diagnostics)};
}

std::pair<VectorXd, MatrixXd> sample_niw(const NiwParams& niw, Rng& rng) {
  MatrixXd sigma = sample_inverse_wishart(niw.scale, niw.dof, rng);
  VectorXd mu = sample_normal(niw.mean, sigma / niw.strength, rng);
  return {std::move(mu), std::move(sigma)};
}

ComponentDraw sample_component_params(const MixturePosterior& post, std::size_t k, Rng& rng) {
  if (k >= post.size()) throw InputError("component index out of range");
  const auto alpha = post.alphas();
  ComponentDraw draw;
  draw.weights = sample_dirichlet(alpha, rng);
  std::tie(draw.mean, draw.covariance) = sample_niw(post.components[k].niw, rng);
  return draw;
}

}  // namespace gammacontam
