#include "gammacontam/gammapost.hpp"

#include "gammacontam/error.hpp"
#include "gammacontam/levmar.hpp"
#include "gammacontam/stats.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gammacontam {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<double> ranked_weights(const MixturePosterior& ranked) {
  std::vector<double> out;
  out.reserve(ranked.size());
  for (const auto& c : ranked.components) out.push_back(c.expected_weight);
  return out;
}

// Conditionals c_1..c_K' at the ranked expected r values.
std::vector<double> expected_conditionals(std::span<const double> ranked_r, std::size_t kprime,
                                          double tau, double delta) {
  std::vector<double> c(kprime);
  for (std::size_t k = 0; k < kprime; ++k) c[k] = conditional_probability(ranked_r[k], tau, delta);
  return c;
}

struct HighTail {
  double value = 0.0;
  double d_tau = 0.0;
  double d_delta = 0.0;
};

// sum_k P(C* = k) T_k = sum_k Q_k (T_k - T_{k-1}) with Q_k = prod_{j<=k} c_j.
HighTail high_tail(std::span<const double> ranked_r, std::span<const double> tails,
                   double tau, double delta) {
  HighTail out;
  double q = 1.0;
  double dlog_tau = 0.0;
  double dlog_delta = 0.0;
  double prev_tail = 0.0;
  for (std::size_t k = 0; k < tails.size(); ++k) {
    const double c = conditional_probability(ranked_r[k], tau, delta);
    q *= c;
    dlog_tau -= 1.0 - c;
    dlog_delta -= (1.0 - c) * ranked_r[k];
    const double step = tails[k] - prev_tail;
    out.value += q * step;
    out.d_tau += q * dlog_tau * step;
    out.d_delta += q * dlog_delta * step;
    prev_tail = tails[k];
  }
  return out;
}

std::vector<double> tail_table(const MixturePosterior& ranked, std::size_t kprime, double t) {
  const auto alpha = ranked.alphas();
  std::vector<double> tails(kprime);
  for (std::size_t k = 0; k < kprime; ++k) tails[k] = cumulative_weight_tail(alpha, k + 1, t);
  return tails;
}

}  // namespace

double representative_value(const VectorXd& mean, const MatrixXd& cov) {
  const auto m = mean.size();
  double sum = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) sum += mean(j) / (1.0 + std::sqrt(std::max(cov(j, j), 0.0)));
  return sum / static_cast<double>(m);
}

std::vector<double> ComponentOrdering::ranked_r() const {
  std::vector<double> out;
  out.reserve(order.size());
  for (std::size_t k : order) out.push_back(expected_r[k]);
  return out;
}

ComponentOrdering order_by_expected_r(const MixturePosterior& post, std::vector<double> expected_r) {
  ComponentOrdering out;
  out.expected_r = std::move(expected_r);
  out.order.resize(post.size());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    if (out.expected_r[a] != out.expected_r[b]) return out.expected_r[a] > out.expected_r[b];
    const double wa = post.components[a].expected_weight;
    const double wb = post.components[b].expected_weight;
    if (wa != wb) return wa > wb;
    return a < b;
  });
  return out;
}

ComponentOrdering order_components(const MixturePosterior& post, int mc_draws, std::uint64_t seed) {
  if (mc_draws < 1) throw InputError("mc_draws must be >= 1");
  std::vector<double> expected(post.size());
  for (std::size_t k = 0; k < post.size(); ++k) {
    Rng rng = make_rng(seed, 0x0dde5, k);
    double sum = 0.0;
    for (int z = 0; z < mc_draws; ++z) {
      const auto [mu, sigma] = sample_niw(post.components[k].niw, rng);
      sum += representative_value(mu, sigma);
    }
    expected[k] = sum / mc_draws;
  }
  return order_by_expected_r(post, std::move(expected));
}

MixturePosterior apply_ordering(const MixturePosterior& post, const ComponentOrdering& ordering) {
  MixturePosterior out;
  out.dim = post.dim;
  out.components.reserve(post.size());
  for (std::size_t k : ordering.order) out.components.push_back(post.components[k]);
  return out;
}

double conditional_probability(double r, double tau, double delta) {
  const double x = tau + delta * r;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

double conditional_probability(double r, const SigmoidParams& params) {
  return conditional_probability(r, params.tau, params.delta);
}

std::vector<double> joint_probabilities(std::span<const double> conditionals) {
  const std::size_t k = conditionals.size();
  std::vector<double> out(k + 1, 0.0);
  if (k == 0) {
    out[0] = 1.0;
    return out;
  }
  out[0] = 1.0 - conditionals[0];
  double prefix = 1.0;
  for (std::size_t j = 0; j < k; ++j) {
    prefix *= conditionals[j];
    const double next = j + 1 < k ? conditionals[j + 1] : 0.0;
    out[j + 1] = prefix * (1.0 - next);
  }
  return out;
}

std::size_t truncation_length(std::span<const double> ranked_weights, double cap) {
  if (ranked_weights.empty()) throw InputError("no components to truncate");
  if (ranked_weights.front() >= cap)
    throw CalibrationInfeasible("most anomalous component has E[pi] >= cap");
  if (cap >= 1.0) return ranked_weights.size();
  double cum = 0.0;
  std::size_t kprime = 0;
  for (std::size_t k = 0; k < ranked_weights.size(); ++k) {
    cum += ranked_weights[k];
    if (cum < cap) kprime = k + 1;
    else break;
  }
  return kprime;
}

std::vector<double> truncate_conditionals(const MixturePosterior& ranked,
                                          std::span<const double> conditionals, double cap) {
  const auto kprime = truncation_length(ranked_weights(ranked), cap);
  std::vector<double> out(conditionals.begin(), conditionals.end());
  for (std::size_t k = kprime; k < out.size(); ++k) out[k] = 0.0;
  return out;
}

double cumulative_weight_tail(std::span<const double> alphas, std::size_t k, double t) {
  if (k == 0 || k > alphas.size()) throw InputError("cumulative weight index out of range");
  double head = 0.0, rest = 0.0;
  for (std::size_t j = 0; j < alphas.size(); ++j) (j < k ? head : rest) += alphas[j];
  if (rest <= 0.0) return 1.0;  // the full simplex sums to one
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  return boost::math::ibetac(head, rest, t);
}

void CalibrationTargets::validate() const {
  if (!(p0 > 0.0 && p0 < 1.0)) throw InputError("p0 must be in (0, 1)");
  if (!(p_high > 0.0 && p_high < 1.0)) throw InputError("p_high must be in (0, 1)");
  if (!(cap > 0.0 && cap <= 1.0)) throw InputError("cap must be in (0, 1]");
  if (!(t > 0.0 && t < cap)) throw InputError("t must be in (0, cap)");
}

double high_contamination_probability(const MixturePosterior& ranked,
                                      std::span<const double> ranked_r, double tau,
                                      double delta, double t, double cap) {
  const auto kprime = truncation_length(ranked_weights(ranked), cap);
  const auto tails = tail_table(ranked, kprime, t);
  const auto joint = joint_probabilities(expected_conditionals(ranked_r, kprime, tau, delta));
  double out = 0.0;
  for (std::size_t k = 1; k <= kprime; ++k) out += joint[k] * tails[k - 1];
  return out;
}

SigmoidParams calibrate(const MixturePosterior& ranked, std::span<const double> ranked_r,
                        const CalibrationTargets& targets) {
  targets.validate();
  if (ranked_r.size() != ranked.size()) throw InputError("ranked r size mismatch");
  const auto kprime = truncation_length(ranked_weights(ranked), targets.cap);
  const auto tails = tail_table(ranked, kprime, targets.t);
  if (targets.p_high < tails.front()) {
    throw CalibrationInfeasible("p_high " + std::to_string(targets.p_high) +
                                " is below P(pi_1 >= t) = " + std::to_string(tails.front()));
  }

  SigmoidParams out;
  out.t = targets.t;
  out.p0 = targets.p0;
  out.p_high = targets.p_high;
  const double logit_p0 = std::log(targets.p0 / (1.0 - targets.p0));
  const double r1 = ranked_r.front();

  // Supremum of P(gamma >= t): as delta grows every conditional below the
  // top component's r tends to 1.
  double sup_delta = 0.0;
  for (std::size_t k = 1; k < kprime; ++k) {
    if (ranked_r[k] < r1) sup_delta = std::max(sup_delta, (27.7 + logit_p0) / (r1 - ranked_r[k]));
  }
  const double sup = high_tail(ranked_r, tails, logit_p0 - sup_delta * r1, sup_delta).value;
  if (targets.p_high >= sup) {
    out.delta = sup_delta;
    out.tau = logit_p0 - sup_delta * r1;
    out.saturated = true;
    out.residual_norm = targets.p_high - sup;
    spdlog::warn("p_high={} exceeds the reachable P(gamma >= t)={:.3g}; saturating the sigmoid",
                 targets.p_high, sup);
  } else {
    const ResidualFn residual = [&](const VectorXd& x, VectorXd& r, MatrixXd& j) {
      const double c1 = conditional_probability(r1, x(0), x(1));
      const auto high = high_tail(ranked_r, tails, x(0), x(1));
      r.resize(2);
      j.resize(2, 2);
      r(0) = (1.0 - c1) - targets.p0;
      r(1) = high.value - targets.p_high;
      j(0, 0) = c1 * (1.0 - c1);
      j(0, 1) = c1 * (1.0 - c1) * r1;
      j(1, 0) = high.d_tau;
      j(1, 1) = high.d_delta;
    };
    const double delta0 = -1.0;
    VectorXd x0(2);
    x0 << logit_p0 - delta0 * r1, delta0;
    LevMarOptions options;
    options.max_iter = 200;
    options.residual_tol = 1e-10;
    auto result = levenberg_marquardt(residual, x0, options);

    if (!result.converged) {
      // tau is pinned by the first equation; P(gamma >= t) is then monotone
      // non-decreasing in delta, so bisection finishes what LM could not.
      const auto g = [&](double delta) {
        return high_tail(ranked_r, tails, logit_p0 - delta * r1, delta).value - targets.p_high;
      };
      double lo = std::min(result.x(1), -1.0), hi = std::max(result.x(1), 1.0);
      while (g(lo) > 0.0 && lo > -1e8) lo *= 2.0;
      while (g(hi) < 0.0 && hi < 1e8) hi *= 2.0;
      for (int it = 0; it < 400 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? hi : lo) = mid;
      }
      const double delta = 0.5 * (lo + hi);
      VectorXd x(2);
      x << logit_p0 - delta * r1, delta;
      VectorXd r;
      MatrixXd j;
      residual(x, r, j);
      result.x = x;
      result.residual_norm = r.norm();
    }
    out.tau = result.x(0);
    out.delta = result.x(1);
    out.residual_norm = result.residual_norm;
    out.solved = result.residual_norm < 1e-6;
  }

  const auto cond = expected_conditionals(ranked_r, kprime, out.tau, out.delta);
  for (std::size_t k = 1; k < cond.size(); ++k)
    if (cond[k] > cond[k - 1] + 1e-12) out.monotone = false;
  if (!out.monotone) spdlog::warn("calibrated sigmoid is not non-increasing along the ranking");
  return out;
}

GammaPosterior::GammaPosterior(std::vector<double> samples, double zero_mass, double cap)
    : samples_(std::move(samples)), sorted_(samples_), zero_mass_(zero_mass), cap_(cap) {
  if (samples_.empty()) throw InputError("gamma posterior needs samples");
  std::sort(sorted_.begin(), sorted_.end());
}

double GammaPosterior::mean() const { return stats::mean(samples_); }
double GammaPosterior::std() const { return stats::stddev(samples_); }
double GammaPosterior::quantile(double u) const { return stats::quantile_sorted(sorted_, u); }

double point_estimate(const GammaPosterior& posterior) { return posterior.mean(); }

GammaDraws sample_gamma(const MixturePosterior& ranked, const SigmoidParams& params,
                        std::size_t truncation, std::size_t draws, double cap, Rng& rng) {
  if (truncation > ranked.size()) throw InputError("truncation exceeds component count");
  const auto alpha = ranked.alphas();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> cond(truncation);
  GammaDraws out;
  out.samples.reserve(draws);
  for (std::size_t z = 0; z < draws; ++z) {
    const VectorXd pi = sample_dirichlet(alpha, rng);
    for (std::size_t k = 0; k < truncation; ++k) {
      const auto [mu, sigma] = sample_niw(ranked.components[k].niw, rng);
      cond[k] = conditional_probability(representative_value(mu, sigma), params);
    }
    const auto joint = joint_probabilities(cond);
    const double u = uniform(rng);
    std::size_t chosen = joint.size() - 1;
    double acc = 0.0;
    for (std::size_t k = 0; k < joint.size(); ++k) {
      acc += joint[k];
      if (u < acc) {
        chosen = k;
        break;
      }
    }
    double gamma = 0.0;
    for (std::size_t j = 0; j < chosen; ++j) gamma += pi(static_cast<Eigen::Index>(j));
    if (chosen == 0) ++out.zero_draws;
    if (gamma > cap) {
      gamma = cap;
      ++out.capped_draws;
    }
    out.samples.push_back(gamma);
  }
  return out;
}

nlohmann::json to_json(const SigmoidParams& p) {
  return {{"tau", p.tau},         {"delta", p.delta},         {"t", p.t},
          {"p0", p.p0},           {"p_high", p.p_high},       {"solved", p.solved},
          {"saturated", p.saturated}, {"monotone", p.monotone}, {"retries_used", p.retries_used},
          {"residual_norm", p.residual_norm}};
}

nlohmann::json to_json(const GammaPosterior& posterior) {
  nlohmann::json quantiles = nlohmann::json::object();
  for (int q : {1, 5, 25, 50, 75, 95, 99}) quantiles[std::to_string(q)] = posterior.quantile(q / 100.0);
  nlohmann::json restarts = nlohmann::json::array();
  for (const auto& r : posterior.restarts) {
    restarts.push_back({{"index", r.index},
                        {"seed", r.seed},
                        {"attempts", r.attempts},
                        {"exhausted", r.exhausted},
                        {"active_components", r.active_components},
                        {"truncation", r.truncation},
                        {"vi_iterations", r.vi_iterations},
                        {"vi_converged", r.vi_converged},
                        {"zero_draws", r.zero_draws},
                        {"capped_draws", r.capped_draws},
                        {"sigmoid", to_json(r.sigmoid)}});
  }
  return {{"mean", posterior.mean()},
          {"std", posterior.std()},
          {"zero_mass", posterior.zero_mass()},
          {"quantiles", quantiles},
          {"cap", posterior.cap()},
          {"samples", posterior.samples().size()},
          {"restarts", restarts}};
}

}  // namespace gammacontam
