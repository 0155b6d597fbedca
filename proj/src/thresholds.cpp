#include "gammacontam/thresholds.hpp"

#include "gammacontam/error.hpp"
#include "gammacontam/scorespace.hpp"
#include "gammacontam/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gammacontam {
namespace {

void check_input(std::span<const double> scores) {
  if (scores.size() < 4) throw InputError("threshold estimators need at least 4 scores");
  for (double s : scores)
    if (!std::isfinite(s)) throw InputError("threshold estimators reject NaN/Inf scores");
}

bool is_constant(std::span<const double> scores) {
  return std::all_of(scores.begin(), scores.end(), [&](double s) { return s == scores.front(); });
}

double sample_sd(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double student_quantile(double p, double dof) {
  return boost::math::quantile(boost::math::students_t(dof), p);
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }
double normal_cdf(double x) { return boost::math::cdf(boost::math::normal(), x); }

// Index of the value farthest from the mean; ties go to the larger value.
std::size_t most_extreme(const std::vector<double>& v, double mean) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = std::abs(v[i] - mean), b = std::abs(v[best] - mean);
    if (d > b || (d == b && v[i] > v[best])) best = i;
  }
  return best;
}

}  // namespace

double exceedance_fraction(std::span<const double> scores, double threshold) {
  if (scores.empty()) return 0.0;
  const auto above = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
  return static_cast<double>(above) / static_cast<double>(scores.size());
}

double iqr_threshold(std::span<const double> scores) {
  check_input(scores);
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = stats::quantile_sorted(sorted, 0.25);
  const double q3 = stats::quantile_sorted(sorted, 0.75);
  return q3 + 1.5 * (q3 - q1);
}

double zscore_threshold(std::span<const double> scores) {
  check_input(scores);
  if (is_constant(scores)) return scores.front();
  return stats::mean(scores) + 3.0 * stats::stddev(scores);
}

double chauvenet_threshold(std::span<const double> scores) {
  check_input(scores);
  if (is_constant(scores)) return scores.front();
  const double n = static_cast<double>(scores.size());
  const double zc = normal_quantile(1.0 - 0.25 / n);
  return stats::mean(scores) + zc * stats::stddev(scores);
}

double mad_threshold(std::span<const double> scores) {
  check_input(scores);
  if (is_constant(scores)) return scores.front();
  const double med = stats::median(scores);
  std::vector<double> dev(scores.size());
  std::transform(scores.begin(), scores.end(), dev.begin(), [med](double s) { return std::abs(s - med); });
  return stats::mean(scores) + stats::median(dev);
}

double karcher_threshold(std::span<const double> scores) {
  check_input(scores);
  if (is_constant(scores)) return scores.front();
  return stats::mean(scores) + stats::stddev(scores);
}

double mtt_threshold(std::span<const double> scores) {
  check_input(scores);
  std::vector<double> kept(scores.begin(), scores.end());
  while (kept.size() >= 3) {
    const double n = static_cast<double>(kept.size());
    const double mean = stats::mean(kept);
    const double sd = sample_sd(kept, mean);
    if (sd == 0.0) break;
    const double t = student_quantile(1.0 - 0.05 / 2.0, n - 2.0);
    const double tau = t * (n - 1.0) / (std::sqrt(n) * std::sqrt(n - 2.0 + t * t));
    const std::size_t idx = most_extreme(kept, mean);
    if (std::abs(kept[idx] - mean) <= tau * sd) break;
    kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  return *std::max_element(kept.begin(), kept.end());
}

double gesd_threshold(std::span<const double> scores) {
  check_input(scores);
  const std::size_t n = scores.size();
  const auto max_outliers = static_cast<std::size_t>(std::ceil(0.25 * static_cast<double>(n)));
  std::vector<double> kept(scores.begin(), scores.end());
  std::vector<double> removed;
  std::size_t outliers = 0;
  for (std::size_t i = 1; i <= max_outliers && kept.size() >= 3; ++i) {
    const double mean = stats::mean(kept);
    const double sd = sample_sd(kept, mean);
    if (sd == 0.0) break;
    const std::size_t idx = most_extreme(kept, mean);
    const double stat = std::abs(kept[idx] - mean) / sd;
    const double m = static_cast<double>(n - i + 1);  // sample size at this step
    const double p = 1.0 - 0.05 / (2.0 * m);
    const double t = student_quantile(p, m - 2.0);
    const double lambda = (m - 1.0) * t / std::sqrt((m - 2.0 + t * t) * m);
    removed.push_back(kept[idx]);
    kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(idx));
    if (stat > lambda) outliers = i;
  }
  // Anything removed after the last significant step goes back.
  kept.insert(kept.end(), removed.begin() + static_cast<std::ptrdiff_t>(outliers), removed.end());
  return *std::max_element(kept.begin(), kept.end());
}

double boot_threshold(std::span<const double> scores, Rng& rng) {
  check_input(scores);
  if (is_constant(scores)) return scores.front();
  constexpr int resamples = 1000;
  const std::size_t n = scores.size();
  const double nd = static_cast<double>(n);
  const double theta = stats::mean(scores);

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> boot(resamples);
  for (auto& b : boot) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += scores[pick(rng)];
    b = s / nd;
  }
  std::sort(boot.begin(), boot.end());

  const auto below = std::count_if(boot.begin(), boot.end(), [&](double b) { return b < theta; });
  const double frac = std::clamp(static_cast<double>(below) / resamples, 0.5 / resamples,
                                 1.0 - 0.5 / resamples);
  const double z0 = normal_quantile(frac);

  // Jackknife acceleration; leave-one-out means are (n theta - x_i) / (n - 1).
  double num = 0.0, den = 0.0;
  for (double x : scores) {
    const double d = theta - (nd * theta - x) / (nd - 1.0);
    num += d * d * d;
    den += d * d;
  }
  const double accel = den > 0.0 ? num / (6.0 * std::pow(den, 1.5)) : 0.0;
  const double z = normal_quantile(0.975);
  const double upper = normal_cdf(z0 + (z0 + z) / (1.0 - accel * (z0 + z)));
  return stats::quantile_sorted(boot, upper);
}

double qmcd_threshold(std::span<const double> scores) {
  check_input(scores);
  if (is_constant(scores)) return scores.front();
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front(), hi = sorted.back();
  const double n = static_cast<double>(sorted.size());
  double disc = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double u = (sorted[i] - lo) / (hi - lo);
    disc = std::max({disc, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
  }
  return stats::quantile_sorted(sorted, 1.0 - disc);
}

const std::vector<ThresholdMethod>& all_threshold_methods() {
  static const std::vector<ThresholdMethod> methods{
      ThresholdMethod::iqr,     ThresholdMethod::zscore, ThresholdMethod::chauvenet,
      ThresholdMethod::mad,     ThresholdMethod::karcher, ThresholdMethod::mtt,
      ThresholdMethod::gesd,    ThresholdMethod::boot,   ThresholdMethod::qmcd};
  return methods;
}

std::string method_name(ThresholdMethod method) {
  switch (method) {
    case ThresholdMethod::iqr: return "iqr";
    case ThresholdMethod::zscore: return "zscore";
    case ThresholdMethod::chauvenet: return "chauvenet";
    case ThresholdMethod::mad: return "mad";
    case ThresholdMethod::karcher: return "karcher";
    case ThresholdMethod::mtt: return "mtt";
    case ThresholdMethod::gesd: return "gesd";
    case ThresholdMethod::boot: return "boot";
    case ThresholdMethod::qmcd: return "qmcd";
  }
  return "unknown";
}

ThresholdMethod parse_threshold_method(std::string_view name) {
  for (auto m : all_threshold_methods())
    if (method_name(m) == name) return m;
  throw InputError("unknown threshold method '" + std::string(name) + "'");
}

double compute_threshold(ThresholdMethod method, std::span<const double> scores, std::uint64_t seed) {
  switch (method) {
    case ThresholdMethod::iqr: return iqr_threshold(scores);
    case ThresholdMethod::zscore: return zscore_threshold(scores);
    case ThresholdMethod::chauvenet: return chauvenet_threshold(scores);
    case ThresholdMethod::mad: return mad_threshold(scores);
    case ThresholdMethod::karcher: return karcher_threshold(scores);
    case ThresholdMethod::mtt: return mtt_threshold(scores);
    case ThresholdMethod::gesd: return gesd_threshold(scores);
    case ThresholdMethod::boot: {
      Rng rng = make_rng(seed, 0xb007);
      return boot_threshold(scores, rng);
    }
    case ThresholdMethod::qmcd: return qmcd_threshold(scores);
  }
  throw InputError("unknown threshold method");
}

std::vector<ThresholdEstimate> estimate_all(const ScoreMatrix& matrix,
                                            const std::vector<ThresholdMethod>& methods,
                                            std::uint64_t seed) {
  if (matrix.detectors() < 1) throw InputError("score matrix has no columns");
  std::vector<std::vector<double>> columns;
  for (Eigen::Index j = 0; j < matrix.detectors(); ++j) columns.push_back(matrix.column(j));

  std::vector<ThresholdEstimate> out;
  for (auto method : methods) {
    ThresholdEstimate est;
    est.method = method_name(method);
    try {
      for (std::size_t j = 0; j < columns.size(); ++j) {
        const double thr = compute_threshold(method, columns[j], seed + j);
        est.thresholds.push_back(thr);
        est.per_detector.push_back(exceedance_fraction(columns[j], thr));
      }
      est.gamma_hat = stats::mean(est.per_detector);
    } catch (const std::exception& e) {
      est.thresholds.clear();
      est.per_detector.clear();
      est.error = e.what();
    }
    out.push_back(std::move(est));
  }
  return out;
}

}  // namespace gammacontam
