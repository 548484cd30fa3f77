#include "cpfts/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpfts/error.hpp"

namespace cpfts::stats {

double quantile_type7_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) {
        throw InvalidInput("quantile of an empty sample");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidInput("quantile level must lie in [0, 1]");
    }
    const double pos = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size() || frac == 0.0) {
        return sorted[lo];
    }
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile_type7(std::span<const double> values, double p) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_type7_sorted(sorted, p);
}

double median(std::span<const double> values) { return quantile_type7(values, 0.5); }

double mean(std::span<const double> values) {
    if (values.empty()) {
        throw InvalidInput("mean of an empty sample");
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
    if (values.size() < 2) {
        throw InsufficientData("standard deviation needs at least two values");
    }
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - m) * (v - m);
    }
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double mad(std::span<const double> values) {
    const double med = median(values);
    std::vector<double> dev(values.size());
    std::transform(values.begin(), values.end(), dev.begin(),
                   [med](double v) { return std::abs(v - med); });
    return median(dev);
}

}  // namespace cpfts::stats
