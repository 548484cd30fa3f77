#include "cpfts/quantile_regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cpfts/error.hpp"
#include "cpfts/stats.hpp"

namespace cpfts {

namespace {

constexpr double kDependenceTol = 1e-10;
constexpr double kSmoothing[] = {1e-2, 1e-4, 1e-6, 1e-8};
constexpr int kMmIterations = 10;

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw InvalidInput("quantile level must lie in (0, 1)");
    }
}

double mean_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted, double level) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        total += pinball_loss(y[i], fitted[i], level);
    }
    return total / static_cast<double>(y.size());
}

// Greedy selection of vectors (rows or columns, supplied in order) that are
// linearly independent of those already kept.
class IndependentSet {
public:
    explicit IndependentSet(Eigen::Index dim) : dim_(dim) {}

    bool try_add(const Eigen::VectorXd& v) {
        const double norm = v.norm();
        if (!(norm > 0.0) || static_cast<Eigen::Index>(basis_.size()) >= dim_) {
            return false;
        }
        Eigen::VectorXd r = v;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis_) r -= q.dot(r) * q;
        }
        const double rn = r.norm();
        if (rn <= kDependenceTol * norm) {
            return false;
        }
        basis_.push_back(r / rn);
        return true;
    }

    std::size_t size() const { return basis_.size(); }

private:
    Eigen::Index dim_;
    std::vector<Eigen::VectorXd> basis_;
};

Eigen::VectorXd mm_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double level) {
    Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(X.rows());
    const Eigen::VectorXd rhs_shift = (1.0 - 2.0 * level) * (X.transpose() * ones);
    const double scale = std::max(1e-12, (y - X * beta).cwiseAbs().mean());
    for (double eps_rel : kSmoothing) {
        const double eps = eps_rel * scale;
        for (int it = 0; it < kMmIterations; ++it) {
            const Eigen::VectorXd w = ((y - X * beta).cwiseAbs().array() + eps).inverse().matrix();
            const Eigen::MatrixXd A = X.transpose() * w.asDiagonal() * X;
            const Eigen::VectorXd b = X.transpose() * w.cwiseProduct(y) - rhs_shift;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
            if (ldlt.info() != Eigen::Success) {
                return beta;
            }
            const Eigen::VectorXd next = ldlt.solve(b);
            if (!next.allFinite()) {
                return beta;
            }
            const double change = (next - beta).norm();
            beta = next;
            if (change <= 1e-12 * (1.0 + beta.norm())) {
                break;
            }
        }
    }
    return beta;
}

// Edge-following simplex on the check-loss polyhedron, starting from the
// vertex that interpolates the rows closest to the start solution.
Eigen::VectorXd simplex_polish(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double level,
                               const Eigen::VectorXd& start, int& pivots) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    const double ztol = 1e-12 * (1.0 + y.cwiseAbs().maxCoeff());

    Eigen::VectorXd r = y - X * start;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return std::abs(r[a]) < std::abs(r[b]); });
    std::vector<Eigen::Index> basis;
    IndependentSet rows(d);
    for (Eigen::Index i : order) {
        if (rows.try_add(X.row(i).transpose())) {
            basis.push_back(i);
            if (static_cast<Eigen::Index>(basis.size()) == d) break;
        }
    }
    if (static_cast<Eigen::Index>(basis.size()) < d) {
        return start;
    }

    std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
    for (auto i : basis) in_basis[static_cast<std::size_t>(i)] = 1;

    Eigen::VectorXd beta = start;
    const int max_pivots = static_cast<int>(10 * n + 50);
    Eigen::MatrixXd XB(d, d);
    Eigen::VectorXd yB(d);
    std::vector<std::pair<double, Eigen::Index>> breaks;
    for (pivots = 0; pivots <= max_pivots; ++pivots) {
        for (Eigen::Index c = 0; c < d; ++c) {
            XB.row(c) = X.row(basis[static_cast<std::size_t>(c)]);
            yB[c] = y[basis[static_cast<std::size_t>(c)]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(XB);
        if (lu.rank() < d) {
            break;
        }
        beta = lu.solve(yB);
        r = y - X * beta;
        const Eigen::MatrixXd binv = lu.inverse();
        const Eigen::MatrixXd A = X * binv;  // column c: x_i' delta_c

        double best_g = 0.0;
        Eigen::Index best_c = -1;
        double best_s = 0.0;
        for (Eigen::Index c = 0; c < d; ++c) {
            for (double s : {1.0, -1.0}) {
                double g = s > 0 ? (1.0 - level) : level;
                double mass = 1.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (in_basis[static_cast<std::size_t>(i)]) continue;
                    const double a = s * A(i, c);
                    mass += std::abs(a);
                    if (r[i] > ztol) {
                        g -= level * a;
                    } else if (r[i] < -ztol) {
                        g += (1.0 - level) * a;
                    } else {
                        g += std::max(-level * a, (1.0 - level) * a);
                    }
                }
                if (g < -1e-12 * mass && g < best_g) {
                    best_g = g;
                    best_c = c;
                    best_s = s;
                }
            }
        }
        if (best_c < 0) {
            break;
        }

        breaks.clear();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (in_basis[static_cast<std::size_t>(i)]) continue;
            const double a = best_s * A(i, best_c);
            if ((r[i] > ztol && a > 0.0) || (r[i] < -ztol && a < 0.0)) {
                breaks.emplace_back(r[i] / a, i);
            }
        }
        std::sort(breaks.begin(), breaks.end());
        double g = best_g;
        Eigen::Index entering = -1;
        for (const auto& [t, i] : breaks) {
            g += std::abs(A(i, best_c));
            if (g >= 0.0) {
                entering = i;
                break;
            }
        }
        if (entering < 0) {
            break;
        }
        const auto leaving = basis[static_cast<std::size_t>(best_c)];
        in_basis[static_cast<std::size_t>(leaving)] = 0;
        in_basis[static_cast<std::size_t>(entering)] = 1;
        basis[static_cast<std::size_t>(best_c)] = entering;
    }
    return beta;
}

Eigen::MatrixXd lag_design(std::span<const double> series, int order, std::size_t first_row, Eigen::VectorXd& y) {
    const std::size_t rows = series.size() - first_row;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), order + 1);
    y.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t k = 0; k < rows; ++k) {
        const std::size_t s = first_row + k;
        const auto row = static_cast<Eigen::Index>(k);
        y[row] = series[s];
        X(row, 0) = 1.0;
        for (int lag = 1; lag <= order; ++lag) {
            X(row, lag) = series[s - static_cast<std::size_t>(lag)];
        }
    }
    return X;
}

// Fit on rows first_row..n-1 of the series.
QuantRegModel fit_rows(std::span<const double> series, int order, std::size_t first_row, double level) {
    QuantRegModel model;
    model.order = order;
    model.level = level;
    model.n_eff = static_cast<int>(series.size() - first_row);
    Eigen::VectorXd y;
    const Eigen::MatrixXd X = lag_design(series, order, first_row, y);
    if (order == 0) {
        const double q = stats::quantile_type7(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), level);
        model.coefficients = Eigen::VectorXd::Constant(1, q);
        model.loss = mean_loss(y, Eigen::VectorXd::Constant(y.size(), q), level);
        return model;
    }
    const auto fit = quantile_regression(X, y, level);
    model.coefficients = fit.coefficients;
    model.loss = fit.loss;
    return model;
}

// Minimum mean check loss of a constant fit, attained at the order statistic
// y_(ceil(n * level)).
double min_constant_loss(std::span<const double> series, std::size_t first_row, double level) {
    std::vector<double> y(series.begin() + static_cast<std::ptrdiff_t>(first_row), series.end());
    const auto n = y.size();
    auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
    k = std::clamp<std::size_t>(k, 1, n);
    std::nth_element(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(k - 1), y.end());
    const double q = y[k - 1];
    double total = 0.0;
    for (double v : y) total += pinball_loss(v, q, level);
    return total / static_cast<double>(n);
}

}  // namespace

double pinball_loss(double actual, double predicted, double level) {
    check_level(level);
    return actual >= predicted ? level * (actual - predicted) : (1.0 - level) * (predicted - actual);
}

LinearQuantileFit quantile_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double level) {
    check_level(level);
    if (X.rows() != y.size()) {
        throw InvalidInput("design rows differ from response length");
    }
    if (X.rows() < X.cols() || X.cols() == 0) {
        throw InsufficientData("quantile regression needs at least as many rows as columns");
    }

    std::vector<Eigen::Index> kept;
    IndependentSet cols(X.rows());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        if (cols.try_add(X.col(c))) kept.push_back(c);
    }

    LinearQuantileFit out;
    out.coefficients = Eigen::VectorXd::Zero(X.cols());
    if (kept.empty()) {
        out.loss = mean_loss(y, Eigen::VectorXd::Zero(y.size()), level);
        return out;
    }
    Eigen::MatrixXd Xk(X.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) {
        Xk.col(static_cast<Eigen::Index>(c)) = X.col(kept[c]);
    }

    const Eigen::VectorXd smooth = mm_solve(Xk, y, level);
    const Eigen::VectorXd vertex = simplex_polish(Xk, y, level, smooth, out.pivots);
    const double smooth_loss = mean_loss(y, Xk * smooth, level);
    const double vertex_loss = mean_loss(y, Xk * vertex, level);
    const Eigen::VectorXd& beta = vertex_loss <= smooth_loss ? vertex : smooth;
    out.loss = std::min(vertex_loss, smooth_loss);
    for (std::size_t c = 0; c < kept.size(); ++c) {
        out.coefficients[kept[c]] = beta[static_cast<Eigen::Index>(c)];
    }
    return out;
}

QuantRegModel fit_quantile_ar(std::span<const double> series, int order, double level) {
    check_level(level);
    if (order < 0) {
        throw InvalidInput("autoregressive order must be nonnegative");
    }
    if (series.empty()) {
        throw InsufficientData("quantile autoregression of an empty series");
    }
    const auto n = static_cast<int>(series.size());
    if (n - order < order + 2) {
        auto model = fit_rows(series, 0, 0, level);
        model.fallback = order > 0;
        return model;
    }
    return fit_rows(series, order, static_cast<std::size_t>(order), level);
}

int default_max_order(std::size_t length) { return std::min(5, static_cast<int>(length / 10)); }

OrderSelection select_ar_order_detailed(std::span<const double> series, double level, int p_max) {
    check_level(level);
    const auto n = static_cast<int>(series.size());
    if (n < 3) {
        throw InsufficientData("order selection needs at least three residuals, got " + std::to_string(n));
    }
    if (p_max < 0) {
        p_max = default_max_order(series.size());
    }
    if (n - p_max < p_max + 2) {
        throw InvalidInput("p_max=" + std::to_string(p_max) + " too large for " + std::to_string(n) + " residuals");
    }
    const double n_eff = n - p_max;
    OrderSelection out;
    out.aic.resize(static_cast<std::size_t>(p_max + 1));
    for (int p = 0; p <= p_max; ++p) {
        // every candidate is scored at its minimised check loss; the order-0
        // predictor itself is the type-7 quantile, which need not attain it
        const double loss = p == 0 ? min_constant_loss(series, static_cast<std::size_t>(p_max), level)
                                   : fit_rows(series, p, static_cast<std::size_t>(p_max), level).loss;
        const double aic = 2.0 * n_eff * std::log(loss + 1e-12) + 2.0 * (p + 1);
        out.aic[static_cast<std::size_t>(p)] = aic;
        if (p == 0 || aic < out.aic[static_cast<std::size_t>(out.order)]) {
            out.order = p;
        }
    }
    return out;
}

int select_ar_order(std::span<const double> series, double level, int p_max) {
    return select_ar_order_detailed(series, level, p_max).order;
}

double predict_quantile(const QuantRegModel& model, std::span<const double> latest_lags) {
    if (static_cast<int>(latest_lags.size()) != model.order) {
        throw InvalidInput("expected " + std::to_string(model.order) + " lags, got " +
                           std::to_string(latest_lags.size()));
    }
    double q = model.coefficients[0];
    for (int i = 0; i < model.order; ++i) {
        q += model.coefficients[i + 1] * latest_lags[static_cast<std::size_t>(i)];
    }
    return std::max(q, 0.0);
}

}  // namespace cpfts
