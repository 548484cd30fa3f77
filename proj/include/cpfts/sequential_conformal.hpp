#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace cpfts {

struct SequentialOptions {
    double alpha = 0.2;
    int p_max = -1;  ///< negative: min(5, floor(history length / 10)) at every step
};

/// Per-year, per-age symmetric intervals point +- qhat.
struct SequentialResult {
    std::vector<int> years;
    Eigen::MatrixXd point;  ///< n_test x J
    Eigen::MatrixXd lower;
    Eigen::MatrixXd upper;
    Eigen::MatrixXd qhat;
    Eigen::MatrixXi orders;  ///< selected AR order per cell
    int fallbacks = 0;       ///< cells fitted at order 0 for lack of rows
};

/// Streams through the test years in order. For each year and age the AR
/// order is selected on the absolute residuals seen so far, the (1 - alpha)
/// quantile regression is refitted and the next quantile predicted; then the
/// realised actual is absorbed into the residual history. Intervals for a
/// year only use information from earlier years.
///
/// history holds the residuals (signed or absolute) preceding the first test
/// year, one row per year. A non-finite actual in any row but the last throws
/// StreamError naming that year.
SequentialResult run_sequential(const Eigen::MatrixXd& point_forecasts, const Eigen::MatrixXd& actuals,
                                std::span<const int> years, const Eigen::MatrixXd& history,
                                const SequentialOptions& options);

}  // namespace cpfts
