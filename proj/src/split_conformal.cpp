#include "cpfts/split_conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cpfts/error.hpp"
#include "cpfts/stats.hpp"

namespace cpfts {

namespace {

constexpr double kRelativeFloor = 1e-8;
constexpr double kAbsoluteFloor = 1e-12;

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidInput("alpha must lie in (0, 1)");
    }
}

void check_shapes(const ResidualSet& residuals, const ScaleFunction& scale) {
    if (residuals.residuals.cols() != scale.gamma.size()) {
        throw InvalidInput("scale function length differs from residual curve length");
    }
}

// Smallest k in [1, total] with k / total >= level, using the same division the
// coverage functions report.
std::size_t required_count(std::size_t total, double level) {
    auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(total)));
    k = std::clamp<std::size_t>(k, 1, total);
    while (k > 1 && static_cast<double>(k - 1) / static_cast<double>(total) >= level) {
        --k;
    }
    while (k < total && static_cast<double>(k) / static_cast<double>(total) < level) {
        ++k;
    }
    return k;
}

double order_statistic(std::vector<double> requirements, double level) {
    if (requirements.empty()) {
        throw InsufficientData("no residuals to calibrate on");
    }
    const std::size_t k = required_count(requirements.size(), level);
    std::nth_element(requirements.begin(), requirements.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     requirements.end());
    const double xi = requirements[k - 1];
    if (!std::isfinite(xi)) {
        throw NonCalibrable("required multiplier is not finite");
    }
    return xi;
}

// Smallest double r with r * g >= a (a > 0, g > 0), so a band built as xi * g
// covers the cell whenever xi >= r.
inline double covering_ratio(double a, double g) {
    double r = a / g;
    while (std::isfinite(r) && r * g < a) {
        r = std::nextafter(r, std::numeric_limits<double>::infinity());
    }
    return r;
}

// Requirement of one cell in one tail: how far xi must reach to cover it.
inline double upper_need(double e, double g) { return e > 0.0 ? covering_ratio(e, g) : 0.0; }
inline double lower_need(double e, double g) { return e < 0.0 ? covering_ratio(-e, g) : 0.0; }

enum class Tail { both, upper, lower };

std::vector<double> requirements(const ResidualSet& residuals, const Eigen::VectorXd& gamma, Tail tail,
                                 CoverageCriterion criterion) {
    const auto M = residuals.residuals.rows();
    const auto J = residuals.residuals.cols();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(criterion == CoverageCriterion::band ? M : M * J));
    for (Eigen::Index m = 0; m < M; ++m) {
        double row_max = 0.0;
        for (Eigen::Index j = 0; j < J; ++j) {
            const double e = residuals.residuals(m, j);
            double need = 0.0;
            switch (tail) {
                case Tail::both: need = std::max(upper_need(e, gamma[j]), lower_need(e, gamma[j])); break;
                case Tail::upper: need = upper_need(e, gamma[j]); break;
                case Tail::lower: need = lower_need(e, gamma[j]); break;
            }
            if (std::isnan(need)) {
                need = std::numeric_limits<double>::infinity();
            }
            if (criterion == CoverageCriterion::band) {
                row_max = std::max(row_max, need);
            } else {
                out.push_back(need);
            }
        }
        if (criterion == CoverageCriterion::band) {
            out.push_back(row_max);
        }
    }
    return out;
}

inline bool inside(double e, double g, double xi_lo, double xi_hi) { return -xi_lo * g <= e && e <= xi_hi * g; }

}  // namespace

std::string to_string(StatKind kind) {
    switch (kind) {
        case StatKind::sd: return "sd";
        case StatKind::iqr: return "iqr";
        case StatKind::mad: return "mad";
        case StatKind::quantile: return "quantile";
    }
    return "?";
}

StatKind parse_stat_kind(const std::string& text) {
    if (text == "sd") return StatKind::sd;
    if (text == "iqr") return StatKind::iqr;
    if (text == "mad") return StatKind::mad;
    if (text == "quantile" || text == "quant") return StatKind::quantile;
    throw InvalidInput("unknown summary statistic '" + text + "'");
}

std::string to_string(CoverageCriterion c) {
    return c == CoverageCriterion::band ? "band" : "pointwise";
}

CoverageCriterion parse_coverage_criterion(const std::string& text) {
    if (text == "band") return CoverageCriterion::band;
    if (text == "pointwise") return CoverageCriterion::pointwise;
    throw InvalidInput("unknown calibration criterion '" + text + "'");
}

ResidualSet compute_residuals(const FunctionalSeries& actuals, std::span<const CurveForecast> forecasts, int h) {
    if (h < 1) {
        throw InvalidInput("horizon must be at least 1");
    }
    std::vector<const CurveForecast*> usable;
    for (const auto& f : forecasts) {
        if (f.horizons() >= h) {
            if (f.curves.cols() != static_cast<Eigen::Index>(actuals.ages())) {
                throw InvalidInput("forecast curve length differs from the actual series");
            }
            if (!actuals.contains(f.target_year(h))) {
                throw AlignmentError("no actual curve for target year " + std::to_string(f.target_year(h)));
            }
            usable.push_back(&f);
        }
    }
    if (usable.empty()) {
        throw InsufficientData("no forecasts reach horizon " + std::to_string(h));
    }
    std::stable_sort(usable.begin(), usable.end(),
                     [h](const CurveForecast* a, const CurveForecast* b) { return a->target_year(h) < b->target_year(h); });

    ResidualSet out;
    out.horizon = h;
    out.residuals.resize(static_cast<Eigen::Index>(usable.size()), static_cast<Eigen::Index>(actuals.ages()));
    for (std::size_t m = 0; m < usable.size(); ++m) {
        const int target = usable[m]->target_year(h);
        out.residuals.row(static_cast<Eigen::Index>(m)) =
            actuals.curve(target).transpose() - usable[m]->curves.row(h - 1);
        out.origin_years.push_back(usable[m]->origin_year);
        out.target_years.push_back(target);
    }
    return out;
}

Eigen::VectorXd floor_scale(const Eigen::VectorXd& gamma) {
    const double top = gamma.size() ? gamma.maxCoeff() : 0.0;
    const double delta = top > 0.0 ? kRelativeFloor * top : kAbsoluteFloor;
    return gamma.cwiseMax(delta);
}

ScaleFunction scale_function(const ResidualSet& residuals, StatKind kind, double alpha) {
    check_alpha(alpha);
    const auto M = residuals.residuals.rows();
    const auto J = residuals.residuals.cols();
    const Eigen::Index needed = kind == StatKind::quantile ? 1 : 2;
    if (M < needed) {
        throw InsufficientData(to_string(kind) + " scale needs at least " + std::to_string(needed) +
                               " residual curves, got " + std::to_string(M));
    }
    ScaleFunction out{kind, Eigen::VectorXd(J), alpha};
    std::vector<double> column(static_cast<std::size_t>(M));
    for (Eigen::Index j = 0; j < J; ++j) {
        for (Eigen::Index m = 0; m < M; ++m) {
            column[static_cast<std::size_t>(m)] = residuals.residuals(m, j);
        }
        switch (kind) {
            case StatKind::sd:
                out.gamma[j] = stats::sample_sd(column);
                break;
            case StatKind::iqr:
                out.gamma[j] = stats::quantile_type7(column, 0.75) - stats::quantile_type7(column, 0.25);
                break;
            case StatKind::mad:
                out.gamma[j] = stats::mad(column);
                break;
            case StatKind::quantile:
                for (double& v : column) v = std::abs(v);
                out.gamma[j] = stats::quantile_type7(column, 1.0 - alpha);
                break;
        }
    }
    out.gamma = floor_scale(out.gamma);
    return out;
}

double band_ecp(const ResidualSet& residuals, const ScaleFunction& scale, double xi_lo, double xi_hi) {
    check_shapes(residuals, scale);
    const auto M = residuals.residuals.rows();
    if (M == 0) {
        throw InsufficientData("band coverage of an empty residual set");
    }
    const Eigen::VectorXd gamma = floor_scale(scale.gamma);
    std::size_t covered = 0;
    for (Eigen::Index m = 0; m < M; ++m) {
        bool all = true;
        for (Eigen::Index j = 0; j < residuals.residuals.cols() && all; ++j) {
            all = inside(residuals.residuals(m, j), gamma[j], xi_lo, xi_hi);
        }
        covered += all ? 1 : 0;
    }
    return static_cast<double>(covered) / static_cast<double>(M);
}

double pointwise_ecp(const ResidualSet& residuals, const ScaleFunction& scale, double xi_lo, double xi_hi) {
    check_shapes(residuals, scale);
    const auto total = static_cast<std::size_t>(residuals.residuals.size());
    if (total == 0) {
        throw InsufficientData("pointwise coverage of an empty residual set");
    }
    const Eigen::VectorXd gamma = floor_scale(scale.gamma);
    std::size_t covered = 0;
    for (Eigen::Index m = 0; m < residuals.residuals.rows(); ++m) {
        for (Eigen::Index j = 0; j < residuals.residuals.cols(); ++j) {
            covered += inside(residuals.residuals(m, j), gamma[j], xi_lo, xi_hi) ? 1 : 0;
        }
    }
    return static_cast<double>(covered) / static_cast<double>(total);
}

double calibration_ecp(const ResidualSet& residuals, const ScaleFunction& scale, double xi_lo, double xi_hi,
                       CoverageCriterion criterion) {
    return criterion == CoverageCriterion::band ? band_ecp(residuals, scale, xi_lo, xi_hi)
                                                : pointwise_ecp(residuals, scale, xi_lo, xi_hi);
}

double calibrate_xi(const ResidualSet& residuals, const ScaleFunction& scale, double alpha,
                    CoverageCriterion criterion) {
    check_alpha(alpha);
    check_shapes(residuals, scale);
    const Eigen::VectorXd gamma = floor_scale(scale.gamma);
    return order_statistic(requirements(residuals, gamma, Tail::both, criterion), 1.0 - alpha);
}

XiPair calibrate_xi_pair(const ResidualSet& residuals, const ScaleFunction& scale, double alpha,
                         CoverageCriterion criterion) {
    check_alpha(alpha);
    check_shapes(residuals, scale);
    const Eigen::VectorXd gamma = floor_scale(scale.gamma);
    const double level = 1.0 - alpha / 2.0;
    XiPair out;
    out.lower = order_statistic(requirements(residuals, gamma, Tail::lower, criterion), level);
    out.upper = order_statistic(requirements(residuals, gamma, Tail::upper, criterion), level);
    return out;
}

std::vector<double> isotonic_smooth_xi(std::span<const double> xi_by_h) {
    struct Block {
        double sum;
        std::size_t count;
        double mean() const { return sum / static_cast<double>(count); }
    };
    std::vector<Block> blocks;
    for (double v : xi_by_h) {
        blocks.push_back({v, 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
            const Block last = blocks.back();
            blocks.pop_back();
            blocks.back().sum += last.sum;
            blocks.back().count += last.count;
        }
    }
    std::vector<double> out;
    out.reserve(xi_by_h.size());
    for (const auto& b : blocks) {
        out.insert(out.end(), b.count, b.mean());
    }
    return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> predict_interval_split(const Eigen::VectorXd& forecast,
                                                                    const ScaleFunction& scale, double xi_lo,
                                                                    double xi_hi) {
    if (!(xi_lo >= 0.0 && xi_hi >= 0.0)) {
        throw InvalidInput("tuning parameters must be nonnegative");
    }
    if (forecast.size() != scale.gamma.size()) {
        throw InvalidInput("forecast length differs from the scale function");
    }
    return {forecast - xi_lo * scale.gamma, forecast + xi_hi * scale.gamma};
}

}  // namespace cpfts
