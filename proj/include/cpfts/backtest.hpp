#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpfts/ets.hpp"
#include "cpfts/fts.hpp"
#include "cpfts/metrics.hpp"
#include "cpfts/split_conformal.hpp"

namespace cpfts {

struct YearRange {
    int first = 0;
    int last = -1;

    int length() const { return last - first + 1; }
    bool contains(int year) const { return year >= first && year <= last; }
    bool operator==(const YearRange&) const = default;
};

/// Consecutive train < validation < test ranges partitioning the sample.
struct SplitSpec {
    YearRange train;
    YearRange validation;
    YearRange test;

    /// train = floor(0.6 n), test = floor(0.2 n), validation = the rest. On
    /// 1921..2021 this gives 1921-1980, 1981-2001, 2002-2021.
    static SplitSpec from_proportions(int first_year, int last_year);

    /// Parses "Y1:Y2,Y3:Y4,Y5:Y6".
    static SplitSpec parse(const std::string& text);

    /// Throws InvalidInput unless the ranges are nonempty, contiguous and lie
    /// inside [first_year, last_year].
    void validate(int first_year, int last_year) const;

    std::string to_string() const;
};

enum class SchemeKind { expanding, rolling };

std::string to_string(SchemeKind k);
SchemeKind parse_scheme(const std::string& text);

struct WindowScheme {
    SchemeKind kind = SchemeKind::expanding;
    /// Rolling only. 0 keeps the length of the training window at the first
    /// origin of each phase.
    int rolling_length = 0;
};

enum class Phase { validation, test };

struct Origin {
    YearRange train;
    int origin = 0;
    int target = 0;
};

/// Origins whose h-step targets fall in the phase: from the last year before
/// the phase to (phase end - h). Expanding windows start at the sample start;
/// rolling windows keep a fixed length ending at the origin.
std::vector<Origin> make_origins(const WindowScheme& scheme, const SplitSpec& split, Phase phase, int h);

struct BacktestConfig {
    Method method = Method::split;
    StatKind stat = StatKind::sd;
    std::vector<double> alphas{0.2};
    WindowScheme scheme;
    KRule k_rule = KRule::evr();
    std::optional<SplitSpec> split;  ///< nullopt: proportions of the sample
    bool double_tuning = false;
    bool isotonic = false;
    CoverageCriterion criterion = CoverageCriterion::pointwise;
    int max_horizon = 20;
    /// Sequential only: keep the principal components estimated on the
    /// pre-test years for every test-phase origin (scores still updated).
    bool freeze_model = false;
    /// Sequential only: shortest training window used to build the residual
    /// history. 0 selects half the training range, rounded up.
    int min_history_train = 0;
    std::vector<EtsKind> family{EtsKind::ANN, EtsKind::AAN, EtsKind::AAdN};
    std::string sex = "total";
    std::uint64_t seed = 0;
};

void validate(const BacktestConfig& config);

struct HorizonCalibration {
    double alpha = 0.2;
    int h = 1;
    int m = 0;  ///< residual curves used
    ScaleFunction scale;
    double xi_lower = 0.0;
    double xi_upper = 0.0;
    double xi_lower_raw = 0.0;  ///< before isotonic smoothing
    double xi_upper_raw = 0.0;
    double achieved_ecp = 0.0;  ///< validation coverage under the calibration criterion
    std::string status = "ok";
};

struct HorizonMetrics {
    double alpha = 0.2;
    int h = 1;
    int forecasts = 0;
    double ecp = 0.0;
    double cpd = 0.0;
    double mean_width = 0.0;
    double mean_interval_score = 0.0;
    std::string status = "ok";
};

struct SummaryRow {
    std::string metric;
    double alpha = 0.2;
    SixNumberSummary summary;
};

struct BacktestReport {
    BacktestConfig config;
    SplitSpec split;
    AgeGrid grid{std::vector<double>{0.0, 1.0}};
    std::vector<HorizonMetrics> by_horizon;  ///< ordered by alpha (config order) then h
    std::vector<SummaryRow> summaries;       ///< ecp, cpd, mean_width, mean_interval_score per alpha
    std::map<double, std::vector<QuantileByAge>> quantiles_by_age;

    std::string stat_label() const;
};

struct BacktestResult {
    std::vector<IntervalForecastSet> intervals;  ///< one per alpha, test phase only
    std::vector<HorizonCalibration> calibration; ///< split method only
    BacktestReport report;
};

/// Point forecasts from one training window: FPCA on the window, ETS per
/// score series. With a frozen model the window curves are projected onto its
/// components instead of re-estimating them.
CurveForecast forecast_from_window(const FunctionalSeries& data, const YearRange& window, int horizons,
                                   const KRule& k_rule, std::span<const EtsKind> family,
                                   const FpcaModel* frozen = nullptr);

/// Full pipeline: point forecasts per origin, interval construction by the
/// configured method, and test-phase evaluation.
BacktestResult run_backtest(const FunctionalSeries& data, const BacktestConfig& config);

/// Split calibration only: residuals on the validation phase and the tuning
/// parameters per horizon and level.
std::vector<HorizonCalibration> calibrate_split(const FunctionalSeries& data, const BacktestConfig& config);

}  // namespace cpfts
