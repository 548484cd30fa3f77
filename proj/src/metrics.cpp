#include "cpfts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cpfts/error.hpp"
#include "cpfts/stats.hpp"

namespace cpfts {

namespace {

struct CellCounts {
    std::size_t cells = 0;
    std::size_t covered = 0;
};

CellCounts count_cells(const IntervalForecastSet& intervals, const FunctionalSeries& actuals, int h) {
    CellCounts c;
    for (const auto* f : intervals.at_horizon(h)) {
        const Eigen::VectorXd y = actuals.curve(f->target());
        for (Eigen::Index j = 0; j < y.size(); ++j) {
            ++c.cells;
            c.covered += (f->lower[j] <= y[j] && y[j] <= f->upper[j]) ? 1 : 0;
        }
    }
    if (c.cells == 0) {
        throw InsufficientData("no " + std::to_string(h) + "-step intervals to evaluate");
    }
    return c;
}

}  // namespace

std::string to_string(Method m) { return m == Method::split ? "split" : "sequential"; }

Method parse_method(const std::string& text) {
    if (text == "split") return Method::split;
    if (text == "sequential") return Method::sequential;
    throw InvalidInput("unknown method '" + text + "'");
}

void IntervalForecastSet::add(IntervalForecast f) {
    if (f.lower.size() != f.upper.size() || f.point.size() != f.lower.size()) {
        throw InvalidInput("interval curves have different lengths");
    }
    for (Eigen::Index j = 0; j < f.lower.size(); ++j) {
        if (!(f.lower[j] <= f.upper[j])) {
            throw InvalidInterval("lower bound above upper bound for origin " + std::to_string(f.origin) +
                                  ", horizon " + std::to_string(f.horizon));
        }
    }
    forecasts.push_back(std::move(f));
}

std::vector<const IntervalForecast*> IntervalForecastSet::at_horizon(int h) const {
    std::vector<const IntervalForecast*> out;
    for (const auto& f : forecasts) {
        if (f.horizon == h) out.push_back(&f);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const IntervalForecast* a, const IntervalForecast* b) { return a->origin < b->origin; });
    return out;
}

double ecp_h(const IntervalForecastSet& intervals, const FunctionalSeries& actuals, int h) {
    const auto c = count_cells(intervals, actuals, h);
    return static_cast<double>(c.covered) / static_cast<double>(c.cells);
}

double cpd_h(const IntervalForecastSet& intervals, const FunctionalSeries& actuals, int h, double alpha) {
    // exceedances above and below pool into 1 - ECP because the bounds are inclusive
    return std::abs((1.0 - ecp_h(intervals, actuals, h)) - alpha);
}

double interval_score(double lb, double ub, double actual, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidInput("alpha must lie in (0, 1)");
    }
    if (!(lb <= ub)) {
        throw InvalidInterval("interval lower bound exceeds upper bound");
    }
    double score = ub - lb;
    if (actual < lb) score += (2.0 / alpha) * (lb - actual);
    if (actual > ub) score += (2.0 / alpha) * (actual - ub);
    return score;
}

double mean_interval_score_h(const IntervalForecastSet& intervals, const FunctionalSeries& actuals, int h,
                             double alpha) {
    double total = 0.0;
    std::size_t cells = 0;
    for (const auto* f : intervals.at_horizon(h)) {
        const Eigen::VectorXd y = actuals.curve(f->target());
        for (Eigen::Index j = 0; j < y.size(); ++j) {
            total += interval_score(f->lower[j], f->upper[j], y[j], alpha);
            ++cells;
        }
    }
    if (cells == 0) {
        throw InsufficientData("no " + std::to_string(h) + "-step intervals to score");
    }
    return total / static_cast<double>(cells);
}

double mean_width_h(const IntervalForecastSet& intervals, int h) {
    double total = 0.0;
    std::size_t cells = 0;
    for (const auto* f : intervals.at_horizon(h)) {
        total += (f->upper - f->lower).sum();
        cells += static_cast<std::size_t>(f->upper.size());
    }
    if (cells == 0) {
        throw InsufficientData("no " + std::to_string(h) + "-step intervals");
    }
    return total / static_cast<double>(cells);
}

SixNumberSummary summarize_over_horizons(std::span<const double> values) {
    if (values.empty()) {
        throw InvalidInput("cannot summarise an empty set of values");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    SixNumberSummary s;
    s.min = sorted.front();
    s.q1 = stats::quantile_type7_sorted(sorted, 0.25);
    s.median = stats::quantile_type7_sorted(sorted, 0.5);
    s.mean = stats::mean(values);
    s.q3 = stats::quantile_type7_sorted(sorted, 0.75);
    s.max = sorted.back();
    return s;
}

std::vector<QuantileByAge> averaged_predicted_quantiles(const IntervalForecastSet& intervals, const AgeGrid& grid) {
    std::map<int, std::pair<Eigen::VectorXd, int>> sums;
    for (const auto& f : intervals.forecasts) {
        if (f.upper.size() != static_cast<Eigen::Index>(grid.size())) {
            throw InvalidInput("interval length differs from the age grid");
        }
        auto [it, inserted] = sums.try_emplace(f.horizon, Eigen::VectorXd::Zero(f.upper.size()), 0);
        it->second.first += 0.5 * (f.upper - f.lower);
        it->second.second += 1;
    }
    std::vector<QuantileByAge> out;
    for (const auto& [h, acc] : sums) {
        for (std::size_t j = 0; j < grid.size(); ++j) {
            out.push_back({grid[j], h, acc.first[static_cast<Eigen::Index>(j)] / acc.second});
        }
    }
    return out;
}

}  // namespace cpfts
