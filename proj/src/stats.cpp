#include "gammacontam/stats.hpp"

#include "gammacontam/error.hpp"

#include <algorithm>
#include <cmath>

namespace gammacontam::stats {

double quantile_sorted(std::span<const double> sorted, double u) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  u = std::clamp(u, 0.0, 1.0);
  const double h = u * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double u) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, u);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw InputError("mean of an empty sample");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size()));
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

}  // namespace gammacontam::stats
