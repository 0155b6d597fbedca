#pragma once

#include <span>
#include <vector>

namespace gammacontam::stats {

/// Linear-interpolation (type-7) quantile of already sorted values.
double quantile_sorted(std::span<const double> sorted, double u);

/// Sorts a copy, then quantile_sorted.
double quantile(std::span<const double> values, double u);

double mean(std::span<const double> values);

/// Population (1/N) standard deviation.
double stddev(std::span<const double> values);

double median(std::span<const double> values);

}  // namespace gammacontam::stats
