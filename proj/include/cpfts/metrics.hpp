#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "cpfts/fts.hpp"

namespace cpfts {

enum class Method { split, sequential };

std::string to_string(Method m);
Method parse_method(const std::string& text);

struct IntervalForecast {
    int origin = 0;
    int horizon = 1;
    Eigen::VectorXd point;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    int target() const { return origin + horizon; }
};

/// Interval forecasts of one method at one level, keyed by (origin, horizon).
struct IntervalForecastSet {
    Method method = Method::split;
    double alpha = 0.2;
    std::vector<IntervalForecast> forecasts;

    /// Appends after checking lower <= upper at every age.
    void add(IntervalForecast f);
    std::vector<const IntervalForecast*> at_horizon(int h) const;
};

/// Fraction of (target year, age) cells of the h-step forecasts with
/// lower <= actual <= upper, pooled over origins.
double ecp_h(const IntervalForecastSet& intervals, const FunctionalSeries& actuals, int h);

/// |miscoverage - alpha| over the same cells.
double cpd_h(const IntervalForecastSet& intervals, const FunctionalSeries& actuals, int h, double alpha);

/// Width plus (2/alpha)-scaled exceedance below lb or above ub.
double interval_score(double lb, double ub, double actual, double alpha);

double mean_interval_score_h(const IntervalForecastSet& intervals, const FunctionalSeries& actuals, int h,
                             double alpha);

double mean_width_h(const IntervalForecastSet& intervals, int h);

struct SixNumberSummary {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double mean = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

/// Min, type-7 quartiles, median, mean and max. Throws on empty input.
SixNumberSummary summarize_over_horizons(std::span<const double> values);

struct QuantileByAge {
    double age = 0.0;
    int h = 1;
    double mean_qhat = 0.0;
};

/// Mean interval half-width (the predicted quantile for the sequential
/// method) per age and horizon over all origins, ordered by h then age.
std::vector<QuantileByAge> averaged_predicted_quantiles(const IntervalForecastSet& intervals, const AgeGrid& grid);

}  // namespace cpfts
