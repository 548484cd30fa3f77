#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace cpfts {

/// Check loss: level*(a-q) if a >= q, else (1-level)*(q-a).
double pinball_loss(double actual, double predicted, double level);

struct LinearQuantileFit {
    Eigen::VectorXd coefficients;
    double loss = 0.0;  ///< mean check loss
    int pivots = 0;
};

/// Linear quantile regression of y on the columns of X. A majorize-minimize
/// pass on the smoothed check loss (smoothing annealed from 1e-2 to 1e-8)
/// locates the neighbourhood of the optimum; simplex steps along the edges of
/// the check-loss polyhedron then land on an exact vertex minimiser. Columns
/// that are linearly dependent on earlier columns get a zero coefficient.
LinearQuantileFit quantile_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double level);

/// AR(p) quantile regression of a nonnegative series on its own lags.
struct QuantRegModel {
    int order = 0;
    Eigen::VectorXd coefficients;  ///< intercept then lag 1..p weights
    double level = 0.8;
    double loss = 0.0;  ///< mean check loss over the fitted rows
    int n_eff = 0;
    /// Too few rows for the requested order; fitted as order 0 instead.
    bool fallback = false;
};

/// Fits r_s on (1, r_{s-1}, ..., r_{s-p}) for s = p+1..n. Order 0 is the
/// type-7 empirical quantile of the series at the given level.
QuantRegModel fit_quantile_ar(std::span<const double> series, int order, double level);

/// min(5, floor(length / 10)).
int default_max_order(std::size_t length);

struct OrderSelection {
    int order = 0;
    std::vector<double> aic;  ///< indexed by order 0..p_max
};

/// AIC(p) = 2 n ln(minimised mean check loss + 1e-12) + 2(p+1) on the common sample of
/// n = length - p_max rows; the smallest minimising order wins. A negative
/// p_max selects default_max_order.
OrderSelection select_ar_order_detailed(std::span<const double> series, double level, int p_max = -1);

int select_ar_order(std::span<const double> series, double level, int p_max = -1);

/// Linear predictor at the latest lags (most recent first), clamped at 0.
double predict_quantile(const QuantRegModel& model, std::span<const double> latest_lags);

}  // namespace cpfts
