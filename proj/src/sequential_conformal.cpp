#include "cpfts/sequential_conformal.hpp"

#include <cmath>
#include <string>

#include "cpfts/error.hpp"
#include "cpfts/quantile_regression.hpp"

namespace cpfts {

SequentialResult run_sequential(const Eigen::MatrixXd& point_forecasts, const Eigen::MatrixXd& actuals,
                                std::span<const int> years, const Eigen::MatrixXd& history,
                                const SequentialOptions& options) {
    const auto n_test = point_forecasts.rows();
    const auto J = point_forecasts.cols();
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
        throw InvalidInput("alpha must lie in (0, 1)");
    }
    if (n_test < 1) {
        throw InvalidInput("sequential prediction needs at least one test year");
    }
    if (actuals.rows() != n_test || actuals.cols() != J || history.cols() != J ||
        static_cast<Eigen::Index>(years.size()) != n_test) {
        throw InvalidInput("forecast, actual, history and year dimensions disagree");
    }
    if (history.rows() < 3) {
        throw InsufficientData("sequential prediction needs at least three residuals of history");
    }
    if (!point_forecasts.allFinite() || !history.allFinite()) {
        throw InvalidInput("point forecasts and history must be finite");
    }
    for (Eigen::Index t = 0; t + 1 < n_test; ++t) {
        if (!actuals.row(t).allFinite()) {
            throw StreamError("missing actual for year " + std::to_string(years[static_cast<std::size_t>(t)]));
        }
    }

    const double level = 1.0 - options.alpha;
    SequentialResult out;
    out.years.assign(years.begin(), years.end());
    out.point = point_forecasts;
    out.lower.resize(n_test, J);
    out.upper.resize(n_test, J);
    out.qhat.resize(n_test, J);
    out.orders.resize(n_test, J);

    std::vector<double> residuals;
    std::vector<double> lags;
    for (Eigen::Index j = 0; j < J; ++j) {
        residuals.clear();
        for (Eigen::Index s = 0; s < history.rows(); ++s) {
            residuals.push_back(std::abs(history(s, j)));
        }
        for (Eigen::Index t = 0; t < n_test; ++t) {
            int p_max = options.p_max >= 0 ? options.p_max : default_max_order(residuals.size());
            const int n = static_cast<int>(residuals.size());
            p_max = std::min(p_max, (n - 2) / 2);
            const int order = select_ar_order(residuals, level, p_max);
            const QuantRegModel model = fit_quantile_ar(residuals, order, level);
            out.fallbacks += model.fallback ? 1 : 0;

            lags.clear();
            for (int i = 1; i <= model.order; ++i) {
                lags.push_back(residuals[residuals.size() - static_cast<std::size_t>(i)]);
            }
            const double q = predict_quantile(model, lags);
            out.qhat(t, j) = q;
            out.orders(t, j) = model.order;
            out.lower(t, j) = point_forecasts(t, j) - q;
            out.upper(t, j) = point_forecasts(t, j) + q;

            if (t + 1 < n_test) {
                residuals.push_back(std::abs(actuals(t, j) - point_forecasts(t, j)));
            }
        }
    }
    return out;
}

}  // namespace cpfts
