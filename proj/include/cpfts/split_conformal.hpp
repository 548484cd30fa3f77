#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpfts/ets.hpp"
#include "cpfts/fts.hpp"

namespace cpfts {

/// h-step forecast errors on the calibration years, one row per target year.
struct ResidualSet {
    int horizon = 1;
    Eigen::MatrixXd residuals;  ///< M x J, actual - forecast
    std::vector<int> origin_years;
    std::vector<int> target_years;

    int count() const { return static_cast<int>(residuals.rows()); }
};

enum class StatKind { sd, iqr, mad, quantile };

std::string to_string(StatKind kind);
StatKind parse_stat_kind(const std::string& text);

/// Pointwise residual spread gamma_h(u). Values are floored away from zero
/// (see floor_scale) so every ratio against gamma is finite.
struct ScaleFunction {
    StatKind kind = StatKind::sd;
    Eigen::VectorXd gamma;
    double alpha = 0.2;  ///< used by the quantile kind only
};

/// How calibration counts coverage on the validation residuals.
enum class CoverageCriterion {
    band,       ///< a curve counts only if it lies inside the band at every age
    pointwise,  ///< fraction of (year, age) cells inside the band
};

std::string to_string(CoverageCriterion c);
CoverageCriterion parse_coverage_criterion(const std::string& text);

struct XiPair {
    double lower = 0.0;
    double upper = 0.0;
};

/// Residuals actual(origin + h) - forecast(origin, h) for every forecast that
/// reaches horizon h, ordered by target year. Throws AlignmentError when a
/// target year has no actual curve.
ResidualSet compute_residuals(const FunctionalSeries& actuals, std::span<const CurveForecast> forecasts, int h);

/// Replaces entries below 1e-8 * max(gamma) (1e-12 when gamma is all zero).
Eigen::VectorXd floor_scale(const Eigen::VectorXd& gamma);

ScaleFunction scale_function(const ResidualSet& residuals, StatKind kind, double alpha);

/// Fraction of residual curves with -xi_lo*gamma <= e <= xi_hi*gamma at all ages.
double band_ecp(const ResidualSet& residuals, const ScaleFunction& scale, double xi_lo, double xi_hi);

/// Fraction of residual cells inside the same band.
double pointwise_ecp(const ResidualSet& residuals, const ScaleFunction& scale, double xi_lo, double xi_hi);

double calibration_ecp(const ResidualSet& residuals, const ScaleFunction& scale, double xi_lo, double xi_hi,
                       CoverageCriterion criterion);

/// Smallest xi >= 0 whose symmetric band reaches coverage 1 - alpha; computed
/// exactly as an order statistic of the per-curve (or per-cell) requirements.
double calibrate_xi(const ResidualSet& residuals, const ScaleFunction& scale, double alpha,
                    CoverageCriterion criterion = CoverageCriterion::band);

/// Lower and upper multipliers, each tail calibrated separately at alpha/2.
XiPair calibrate_xi_pair(const ResidualSet& residuals, const ScaleFunction& scale, double alpha,
                         CoverageCriterion criterion = CoverageCriterion::band);

/// Least-squares nondecreasing fit by pool-adjacent-violators.
std::vector<double> isotonic_smooth_xi(std::span<const double> xi_by_h);

/// (forecast - xi_lo*gamma, forecast + xi_hi*gamma).
std::pair<Eigen::VectorXd, Eigen::VectorXd> predict_interval_split(const Eigen::VectorXd& forecast,
                                                                    const ScaleFunction& scale, double xi_lo,
                                                                    double xi_hi);

}  // namespace cpfts
