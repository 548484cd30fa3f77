#pragma once

#include <span>
#include <vector>

namespace cpfts::stats {

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7, position (n-1)p+1). Throws InvalidInput on empty input
/// or p outside [0,1].
double quantile_type7(std::span<const double> values, double p);

/// Same as quantile_type7, for input that is already sorted ascending.
double quantile_type7_sorted(std::span<const double> sorted, double p);

double median(std::span<const double> values);

double mean(std::span<const double> values);

/// Standard deviation with denominator n-1. Requires n >= 2.
double sample_sd(std::span<const double> values);

/// Median absolute deviation about the median (no consistency constant).
double mad(std::span<const double> values);

}  // namespace cpfts::stats
