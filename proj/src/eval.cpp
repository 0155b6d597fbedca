#include "gammacontam/eval.hpp"

#include "gammacontam/error.hpp"
#include "gammacontam/gammapost.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace gammacontam {

double mae(double gamma_hat, double gamma_true) { return std::abs(gamma_hat - gamma_true); }

std::size_t flagged_count(double gamma, std::size_t n) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InputError("contamination must be in [0, 1]");
  return static_cast<std::size_t>(std::round(gamma * static_cast<double>(n)));
}

std::vector<int> threshold_predictions(std::span<const double> scores, double gamma) {
  const std::size_t budget = flagged_count(gamma, scores.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<int> out(scores.size(), 0);
  for (std::size_t i = 0; i < budget; ++i) out[order[i]] = 1;
  return out;
}

Confusion confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw InputError("prediction/label length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i]) (labels[i] ? c.tp : c.fp)++;
    else (labels[i] ? c.fn : c.tn)++;
  }
  return c;
}

double f1_score(std::span<const int> predictions, std::span<const int> labels) {
  const auto c = confusion(predictions, labels);
  const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp + c.fn);
  return denom > 0.0 ? 2.0 * static_cast<double>(c.tp) / denom : 0.0;
}

std::optional<double> f1_deterioration(std::span<const double> scores, std::span<const int> labels,
                                       double gamma_true, double gamma_hat) {
  const double f_true = f1_score(threshold_predictions(scores, gamma_true), labels);
  const double f_hat = f1_score(threshold_predictions(scores, gamma_hat), labels);
  if (f_hat == 0.0) return std::nullopt;
  return (f_true - f_hat) / f_hat;
}

std::optional<ErrorRates> fpr_fnr(std::span<const int> predictions, std::span<const int> labels) {
  const auto c = confusion(predictions, labels);
  if (c.fp + c.tn == 0 || c.fn + c.tp == 0) return std::nullopt;
  return ErrorRates{static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn),
                    static_cast<double>(c.fn) / static_cast<double>(c.fn + c.tp)};
}

std::vector<std::size_t> select_best_detectors(const std::vector<std::vector<double>>& detector_scores,
                                               std::span<const int> labels, double gamma_true) {
  if (detector_scores.empty()) throw InputError("no detectors to select from");
  std::vector<double> f1(detector_scores.size());
  for (std::size_t m = 0; m < detector_scores.size(); ++m)
    f1[m] = f1_score(threshold_predictions(detector_scores[m], gamma_true), labels);
  const double best = *std::max_element(f1.begin(), f1.end());
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < f1.size(); ++m)
    if (f1[m] == best) out.push_back(m);
  return out;
}

std::vector<double> default_v_grid(std::size_t points) {
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i)
    out[i] = points > 1 ? 0.5 * static_cast<double>(i) / static_cast<double>(points - 1) : 0.0;
  return out;
}

std::vector<CalibrationPoint> calibration_curve(const std::vector<const GammaPosterior*>& posteriors,
                                                std::span<const double> gamma_trues,
                                                std::span<const double> v_grid) {
  if (posteriors.empty() || posteriors.size() != gamma_trues.size())
    throw InputError("calibration needs one truth per posterior");
  std::vector<CalibrationPoint> out;
  for (double v : v_grid) {
    CalibrationPoint p;
    p.v = v;
    p.expected = 2.0 * v;
    std::size_t inside = 0;
    for (std::size_t i = 0; i < posteriors.size(); ++i) {
      const double lo = posteriors[i]->quantile(0.5 - v);
      const double hi = posteriors[i]->quantile(0.5 + v);
      if (gamma_trues[i] >= lo && gamma_trues[i] <= hi) ++inside;
    }
    p.empirical = static_cast<double>(inside) / static_cast<double>(posteriors.size());
    out.push_back(p);
  }
  return out;
}

std::vector<MethodRank> rank_methods(const std::vector<EvalRow>& rows) {
  std::map<std::string, std::vector<const EvalRow*>> by_dataset;
  for (const auto& r : rows) by_dataset[r.dataset].push_back(&r);

  std::map<std::string, MethodRank> acc;
  for (const auto& [name, group] : by_dataset) {
    std::vector<const EvalRow*> sorted = group;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const EvalRow* a, const EvalRow* b) { return a->mae < b->mae; });
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j]->mae == sorted[i]->mae) ++j;
      const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
      for (std::size_t k = i; k < j; ++k) {
        auto& m = acc[sorted[k]->method];
        m.method = sorted[k]->method;
        m.mean_rank += rank;
        m.mean_mae += sorted[k]->mae;
        ++m.datasets;
      }
      i = j;
    }
  }
  std::vector<MethodRank> out;
  for (auto& [name, m] : acc) {
    m.mean_rank /= static_cast<double>(m.datasets);
    m.mean_mae /= static_cast<double>(m.datasets);
    out.push_back(m);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MethodRank& a, const MethodRank& b) { return a.mean_rank < b.mean_rank; });
  return out;
}

}  // namespace gammacontam
