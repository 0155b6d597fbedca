#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gammacontam {

class GammaPosterior;

double mae(double gamma_hat, double gamma_true);

/// Round half away from zero of gamma * n.
std::size_t flagged_count(double gamma, std::size_t n);

/// Flags the top flagged_count(gamma, N) scores; among equal scores the
/// lower index is flagged first.
std::vector<int> threshold_predictions(std::span<const double> scores, double gamma);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};
Confusion confusion(std::span<const int> predictions, std::span<const int> labels);

/// F1 with anomalies as the positive class; 0 when undefined.
double f1_score(std::span<const int> predictions, std::span<const int> labels);

/// (F1(gamma_true) - F1(gamma_hat)) / F1(gamma_hat); nullopt when
/// F1(gamma_hat) is 0.
std::optional<double> f1_deterioration(std::span<const double> scores, std::span<const int> labels,
                                       double gamma_true, double gamma_hat);

struct ErrorRates {
  double fpr = 0.0;
  double fnr = 0.0;
};
/// FP / (FP + TN) and FN / (FN + TP); nullopt when labels hold one class.
std::optional<ErrorRates> fpr_fnr(std::span<const int> predictions, std::span<const int> labels);

/// Detectors (column indices) reaching the largest F1 at gamma_true. All
/// ties are kept.
std::vector<std::size_t> select_best_detectors(const std::vector<std::vector<double>>& detector_scores,
                                               std::span<const int> labels, double gamma_true);

struct CalibrationPoint {
  double v = 0.0;
  double expected = 0.0;   // 2v
  double empirical = 0.0;  // share of truths inside [q(0.5 - v), q(0.5 + v)]
};

/// Evenly spaced grid on [0, 0.5].
std::vector<double> default_v_grid(std::size_t points = 51);

std::vector<CalibrationPoint> calibration_curve(const std::vector<const GammaPosterior*>& posteriors,
                                                std::span<const double> gamma_trues,
                                                std::span<const double> v_grid);

/// One row of the benchmark report.
struct EvalRow {
  std::string dataset;
  std::string method;
  double gamma_hat = 0.0;
  double gamma_true = 0.0;
  double mae = 0.0;
  std::optional<double> f1_true;
  std::optional<double> f1_hat;
  std::optional<double> f1_deterioration;
  std::optional<double> fpr;
  std::optional<double> fnr;
};

struct MethodRank {
  std::string method;
  double mean_rank = 0.0;
  double mean_mae = 0.0;
  std::size_t datasets = 0;
};

/// Ranks methods by ascending MAE within each dataset (ties share the mean
/// rank) and averages over datasets.
std::vector<MethodRank> rank_methods(const std::vector<EvalRow>& rows);

}  // namespace gammacontam
