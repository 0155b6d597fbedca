#pragma once

#include "gammacontam/sampling.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gammacontam {

struct ScoreMatrix;

// Univariate threshold rules. Each takes at least 4 finite scores (higher
// means more anomalous) and returns a threshold; the flagged points are
// those strictly above it. Constant input returns the constant.

/// Q3 + 1.5 (Q3 - Q1), type-7 quantiles.
double iqr_threshold(std::span<const double> scores);
/// mean + 3 sd.
double zscore_threshold(std::span<const double> scores);
/// mean + z_c sd with N * P(|Z| > z_c) = 0.5.
double chauvenet_threshold(std::span<const double> scores);
/// mean + MAD (median absolute deviation from the median, unscaled).
double mad_threshold(std::span<const double> scores);
/// Karcher mean (the arithmetic mean for scalars) + 1 sd.
double karcher_threshold(std::span<const double> scores);
/// Modified Thompson tau at alpha = 0.05; returns the largest retained score.
double mtt_threshold(std::span<const double> scores);
/// Rosner's generalized ESD with up to ceil(0.25 N) outliers at alpha =
/// 0.05; returns the largest retained score.
double gesd_threshold(std::span<const double> scores);
/// Upper end of the two-sided 95% BCa bootstrap interval of the mean,
/// 1000 resamples.
double boot_threshold(std::span<const double> scores, Rng& rng);
/// Quantile at 1 - D*, where D* is the star discrepancy of the min-max
/// normalized scores.
double qmcd_threshold(std::span<const double> scores);

/// Fraction of scores strictly above `threshold`.
double exceedance_fraction(std::span<const double> scores, double threshold);

enum class ThresholdMethod { iqr, zscore, chauvenet, mad, karcher, mtt, gesd, boot, qmcd };

const std::vector<ThresholdMethod>& all_threshold_methods();
std::string method_name(ThresholdMethod method);
ThresholdMethod parse_threshold_method(std::string_view name);

/// Dispatch; `seed` only affects boot.
double compute_threshold(ThresholdMethod method, std::span<const double> scores,
                         std::uint64_t seed = 0);

struct ThresholdEstimate {
  std::string method;
  std::vector<double> thresholds;  // per detector column
  std::vector<double> per_detector;
  double gamma_hat = 0.0;          // mean of per_detector
  std::string error;               // non-empty when the method failed
};

/// Applies each method to every column and averages the per-column
/// contamination estimates.
std::vector<ThresholdEstimate> estimate_all(const ScoreMatrix& matrix,
                                            const std::vector<ThresholdMethod>& methods,
                                            std::uint64_t seed = 0);

}  // namespace gammacontam
