#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cpfts/backtest.hpp"
#include "cpfts/fts.hpp"

namespace cpfts {

enum class Sex { female, male, total };

std::string to_string(Sex s);
Sex parse_sex(const std::string& text);

/// One row of a 1x1 period rates file. Missing rates are NaN.
struct RawMortalityRow {
    int year = 0;
    int age = 0;
    bool open_ended = false;  ///< label of the form "110+"
    double female = 0.0;
    double male = 0.0;
    double total = 0.0;

    double rate(Sex s) const;
};

struct RawMortalityTable {
    std::vector<RawMortalityRow> rows;  ///< file order
};

/// Reads Year/Age/Female/Male/Total columns, whitespace- or comma-delimited,
/// after any free-text preamble. "." marks a missing rate.
RawMortalityTable parse_hmd(std::istream& in);
RawMortalityTable load_hmd(const std::filesystem::path& path);

struct ImputationReport {
    std::vector<std::pair<int, int>> cells;  ///< (year, age) rewritten
};

/// Natural-log rates on ages 0..top_age. Ages at or above top_age collapse
/// into the top group by the mean of their positive rates. Missing or
/// nonpositive rates are filled by linear interpolation of the log rates over
/// age within the year, copying the nearest valid value at either end.
FunctionalSeries to_functional_series(const RawMortalityTable& table, Sex sex, int top_age = 100,
                                      ImputationReport* report = nullptr);

/// Fills NaN entries of one curve as described above; throws ImputationError
/// naming the year when fewer than two entries are finite.
void impute_curve(Eigen::Ref<Eigen::VectorXd> log_values, int year, std::vector<int>* filled = nullptr);

/// Wide layout: a `year` column followed by one column per age. Values are
/// raw rates (log-transformed on load) unless log_input is set.
FunctionalSeries parse_wide_csv(std::istream& in, bool log_input, ImputationReport* report = nullptr);
FunctionalSeries load_wide_csv(const std::filesystem::path& path, bool log_input,
                               ImputationReport* report = nullptr);

/// Writes the series values as-is with 17 significant digits.
void write_wide_csv(std::ostream& out, const FunctionalSeries& series);

struct LoadOptions {
    Sex sex = Sex::total;
    int top_age = 100;
    bool log_input = false;
};

/// Detects the layout from the header: a leading `year` column without an
/// `age` column selects the wide layout, anything else the rates layout.
FunctionalSeries load_series(const std::filesystem::path& path, const LoadOptions& options,
                             ImputationReport* report = nullptr);

/// Fixed-notation helper used by every report file: 6 significant digits.
std::string format_number(double value);

/// Writes metrics_by_horizon.csv, summary.csv, intervals.csv,
/// quantiles_by_age.csv, config.json and, for the split method,
/// calibration.csv. With several levels the interval and quantile tables go
/// to one alpha_<level>/ subdirectory per level.
void write_report(const BacktestResult& result, const std::filesystem::path& dir, const std::string& input = "");

void write_calibration_csv(std::ostream& out, const std::vector<HorizonCalibration>& calibration);

}  // namespace cpfts
